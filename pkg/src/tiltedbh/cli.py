"""Command-line interface.

Subcommands:
  spectrum      single Floquet diagnostic at one (U/J, F/J) point
  evolve        single TEBD run from a product state, trajectory to CSV
  experiment    run a configured experiment kind into an output directory
  oracle-check  quick cross-validation of TEBD/MPS against the exact oracle
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fock import ModelParams, build_hamiltonian, enumerate_basis
from .harness import (
    ExperimentConfig,
    floquet_point,
    load_config,
    run_experiment,
)
from .mps import from_product_state, to_state_vector
from .oracle import basis_state, exact_evolve, embed_full, exact_schmidt, fidelity
from .mps import schmidt_spectrum
from .tebd import evolve


def _cmd_spectrum(args):
    config = ExperimentConfig(
        kind="spectral-scan",
        n_particles=args.n_particles,
        n_sites=args.n_sites,
        window=min(args.n_sites, args.n_particles),
        kappa=args.kappa,
        scheme=args.scheme,
        start_steps=args.start_steps,
        phase_tol=args.phase_tol,
        seed=0,
    )
    sample, prop, d2p, d2w = floquet_point(config, args.u, args.f)
    print(f"sector dim       {prop.dim}")
    print(f"n_steps          {prop.n_steps} ({prop.scheme})")
    print(f"delta2 poisson   {d2p:.6g}")
    print(f"delta2 wigner    {d2w:.6g}")
    verdict = "regular (Poisson)" if d2p < d2w else "chaotic (Wigner-Dyson)"
    print(f"closer to        {verdict}")
    if args.out:
        np.savetxt(args.out, sample.spacings, header="unit-mean spacings")
        print(f"spacings written to {args.out}")
    return 0


def _parse_occupations(text):
    return [int(x) for x in text.split(",")]


def _cmd_evolve(args):
    occ = _parse_occupations(args.occupations)
    params = ModelParams(J=1.0, U=args.u, F=args.f)
    t_b = params.bloch_period
    state = from_product_state(occ, args.n_max, args.chi)
    traj = evolve(
        state, params,
        t_final=args.t_final * t_b,
        dt=t_b / args.steps_per_period,
        chi_max=args.chi,
        observe_every=args.observe_every * t_b,
        epsilon=args.epsilon,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    m = len(occ)
    header = "time,S_max,bond,discarded_weight,n_above_eps," + ",".join(
        f"n_{l + 1}" for l in range(m)
    )
    with open(out / "trajectory.csv", "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for i, t in enumerate(traj.times):
            dens = ",".join(f"{x:.12g}" for x in traj.densities[i])
            fh.write(
                f"{t:.12g},{traj.s_max[i]:.12g},{traj.max_bond[i]},"
                f"{traj.cum_discarded[i]:.12g},{traj.n_above_eps[i]},{dens}\n"
            )
    with open(out / "schmidt_spectra.csv", "w", encoding="utf-8") as fh:
        fh.write("time,bond,alpha,lambda\n")
        for i, t in enumerate(traj.times):
            for alpha, lam in enumerate(traj.spectra[i], start=1):
                fh.write(f"{t:.12g},{traj.max_bond[i]},{alpha},{lam:.12g}\n")
    print(f"trajectory written to {out}")
    return 0


def _cmd_experiment(args):
    config = load_config(args.config)
    if args.kind != config.kind:
        print(f"error: config declares kind {config.kind!r}, got {args.kind!r}",
              file=sys.stderr)
        return 2
    result = run_experiment(config, args.out)
    print(f"experiment {config.kind} done: {result}")
    return 0


def _cmd_oracle_check(args):
    failures = 0

    def check(name, ok):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    basis = enumerate_basis(3, 4, 3)
    params = ModelParams(J=1.0, U=1.0, F=1.0)
    ham = build_hamiltonian(basis, params, boundary="open")
    init = (1, 1, 1, 0)
    exact = exact_evolve(basis_state(basis, init), ham, 2.0)
    state = from_product_state(init, 3, None)
    traj = evolve(state, params, t_final=2.0, dt=0.002, chi_max=None,
                  observe_every=2.0)
    vec = to_state_vector(state)
    overlap = abs(np.vdot(embed_full(exact, 3), vec)) ** 2
    check(f"TEBD vs exact propagation fidelity={overlap:.9f}",
          overlap > 1 - 1e-6)

    rng = np.random.default_rng(7)
    amp = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    amp /= np.linalg.norm(amp)
    from .mps import from_state_vector

    dense = embed_full(basis_state(basis, init).__class__(basis, amp), 3)
    mstate = from_state_vector(dense, 4, 4)
    ok = True
    for cut in (1, 2, 3):
        ref = exact_schmidt(basis_state(basis, init).__class__(basis, amp),
                            cut, 3)
        got = schmidt_spectrum(mstate, cut - 1)
        k = min(len(ref.values), len(got.values))
        ok &= bool(np.allclose(ref.values[:k], got.values[:k], atol=1e-9))
    check("MPS Schmidt spectra vs dense SVD", ok)

    check("fidelity(x, x) == 1",
          abs(fidelity(exact, exact) - 1.0) < 1e-12)
    print("oracle-check:", "ALL PASS" if failures == 0 else f"{failures} FAILURES")
    return 1 if failures else 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="tiltedbh",
        description="Tilted Bose-Hubbard chain: TEBD and Floquet statistics",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="Floquet spacing statistics at a point")
    p.add_argument("--n-particles", type=int, default=8)
    p.add_argument("--n-sites", type=int, default=9)
    p.add_argument("--kappa", type=int, default=0)
    p.add_argument("--u", type=float, required=True, help="U/J")
    p.add_argument("--f", type=float, required=True, help="F/J")
    p.add_argument("--scheme", default="cf4",
                   choices=["midpoint", "cf4", "ipcf4"])
    p.add_argument("--start-steps", type=int, default=32)
    p.add_argument("--phase-tol", type=float, default=1e-6)
    p.add_argument("--out", help="optional spacings output file")
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("evolve", help="single TEBD run")
    p.add_argument("--occupations", required=True,
                   help="comma-separated site occupations, e.g. 0,2,1,0")
    p.add_argument("--u", type=float, required=True, help="U/J")
    p.add_argument("--f", type=float, required=True, help="F/J")
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--chi", type=int, default=100)
    p.add_argument("--steps-per-period", type=int, default=1000)
    p.add_argument("--t-final", type=float, default=4.776,
                   help="in units of the Bloch period")
    p.add_argument("--observe-every", type=float, default=0.1,
                   help="in units of the Bloch period")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evolve)

    p = sub.add_parser("experiment", help="run a configured experiment")
    p.add_argument("kind", choices=["schmidt-distribution", "spectral-scan",
                                    "entropy-scan", "threshold-scan"])
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("oracle-check", help="cross-validate against the oracle")
    p.set_defaults(func=_cmd_oracle_check)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
