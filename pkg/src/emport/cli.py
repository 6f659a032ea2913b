"""Command-line entry point.

Subcommands cover the full experiment surface: the zero-temperature curves,
the existence checks, the PDE solves, policy iteration, the low-temperature
expansion, training, out-of-sample evaluation and the Monte Carlo
convergence curve.  Every run writes CSVs (stamped with the config hash)
under the output directory and prints a one-screen summary.

Exit codes: 0 success, 1 domain/numeric error, 2 usage error.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import classical, conditions, evaluation, hjb
from . import actor_critic as ac
from .config import ConfigError, RunConfig, config_hash, parse_config
from .truncnorm import DomainError


def _build_parser():
    ap = argparse.ArgumentParser(prog="emport",
                                 description="entropy-regularized exploratory "
                                             "portfolio toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, mode_choices=None):
        sp.add_argument("--config", metavar="PATH", help="run configuration file")
        sp.add_argument("--out", metavar="DIR", help="output directory")
        sp.add_argument("--seed", type=int, help="seed override")
        if mode_choices:
            sp.add_argument("--mode", choices=mode_choices, help="mode override")

    common(sub.add_parser("solve-classical", help="zero-temperature curves and fit"))
    common(sub.add_parser("check-conditions", help="existence-condition report"))
    common(sub.add_parser("solve-hjb", help="reduced PDE solve"))
    common(sub.add_parser("policy-iterate", help="policy evaluation/improvement loop"))
    common(sub.add_parser("expansion-check", help="low-temperature expansion diagnostics"))
    tr = sub.add_parser("train", help="actor-critic training")
    common(tr, mode_choices=["entropy", "merton"])
    tr.add_argument("--episodes", type=int, help="episode count override")
    evp = sub.add_parser("evaluate", help="out-of-sample Monte Carlo test")
    common(evp, mode_choices=["deterministic", "stochastic"])
    evp.add_argument("--checkpoint", metavar="PATH", help="trained parameter file")
    evp.add_argument("--n-test", type=int, help="test path count override")
    mc = sub.add_parser("mc-curve", help="Monte Carlo convergence curve")
    common(mc, mode_choices=["deterministic", "stochastic"])
    mc.add_argument("--checkpoint", metavar="PATH", help="trained parameter file")
    return ap


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = RunConfig(market=cfg.market, grid=cfg.grid,
                        train=ac.TrainConfig(episodes=cfg.train.episodes,
                                             batch_n=cfg.train.batch_n,
                                             lr_exponent=cfg.train.lr_exponent,
                                             seed=args.seed, mode=cfg.train.mode,
                                             grad_clip=cfg.train.grad_clip),
                        eval=type(cfg.eval)(n_test=cfg.eval.n_test,
                                            mode=cfg.eval.mode, seed=args.seed),
                        output_dir=cfg.output_dir)
    return cfg


def _out_dir(args, cfg) -> str:
    out = args.out or os.environ.get("EM_OUTPUT_DIR") or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_solve_classical(args, cfg, out, tag):
    p = cfg.market
    t, L, M = classical.solve_lm_odes(p, 4 * p.n_steps)
    fit = classical.fit_parametric(L, M, p.T, t_grid=t)
    L_psi, M_psi = classical.parametric_lm(fit.psi, t, p.T)
    classical.lm_curves_csv(os.path.join(out, "lm_curves.csv"), t, L, M,
                            L_psi, M_psi, header_comment=tag)
    rL, rM = classical.lm_residuals(p, t, L, M)
    print(f"L(0) = {L[0]:.6f}   M(0) = {M[0]:.6f}")
    print(f"max ode defect      L: {np.abs(rL).max():.3e}   M: {np.abs(rM).max():.3e}")
    print(f"parametric sup err  L: {fit.sup_err_L:.3e}   M: {fit.sup_err_M:.3e}")
    print(f"psi = {np.round(fit.psi.as_array(), 6)}")
    print(f"wrote {out}/lm_curves.csv")
    return 0


def _cmd_check_conditions(args, cfg, out, tag):
    rep = conditions.build_report(cfg.market, cfg.grid.y_lo, cfg.grid.y_hi)
    print("\n".join(rep.lines()))
    rep.to_csv(os.path.join(out, "conditions.csv"), header_comment=tag)
    print(f"wrote {out}/conditions.csv")
    return 0


def _cmd_solve_hjb(args, cfg, out, tag):
    surf = hjb.solve_hjb(cfg.market, cfg.grid)
    res = hjb.hjb_residual(cfg.market, surf)
    res_in = hjb.hjb_residual(cfg.market, surf, collar=3)
    surf.to_csv(os.path.join(out, "u_surface.csv"), header_comment=tag)
    hjb.policy_surface_csv(cfg.market, surf, os.path.join(out, "policy_surface.csv"),
                           header_comment=tag)
    j0 = int(np.argmin(np.abs(cfg.grid.y - cfg.market.y0)))
    v0 = (np.exp(surf.u[0, j0]) - 1.0) / (1.0 - cfg.market.eta)
    print(f"u(0, y0) = {surf.u[0, j0]:.6f}   V(0, 1, y0) = {v0:.6f}")
    print(f"max defect = {np.abs(res).max():.3e} (all interior), {np.abs(res_in).max():.3e} (3-cell wall collar excluded)")
    print(f"wrote {out}/u_surface.csv, {out}/policy_surface.csv")
    return 0


def _cmd_policy_iterate(args, cfg, out, tag):
    result = hjb.policy_iteration(cfg.market, cfg.grid, kappa=0.2, chi=0.5)
    with open(os.path.join(out, "policy_iteration.csv"), "w", newline="\n") as fh:
        fh.write(f"# {tag}\n")
        fh.write("iteration,sup_diff\n")
        for i, d in enumerate(result.sup_diffs, start=1):
            fh.write(f"{i},{d:.12g}\n")
    result.surfaces[-1].to_csv(os.path.join(out, "policy_iteration_surface.csv"),
                               header_comment=tag)
    print(f"iterations: {len(result.surfaces)}   converged: {result.converged}")
    if result.sup_diffs:
        print(f"final sup diff: {result.sup_diffs[-1]:.3e}")
    print(f"wrote {out}/policy_iteration.csv")
    return 0


def _cmd_expansion_check(args, cfg, out, tag):
    rep = hjb.expansion_check(cfg.market, cfg.grid, [1e-2, 5e-3])
    with open(os.path.join(out, "expansion.csv"), "w", newline="\n") as fh:
        fh.write(f"# {tag}\n")
        fh.write("m,r_m,r_half,ratio,mean_expansion_err\n")
        for row in rep["rows"]:
            fh.write(f"{row['m']:.10g},{row['r_m']:.10g},{row['r_half']:.10g},"
                     f"{row['ratio']:.10g},{row['mean_expansion_err']:.10g}\n")
    for row in rep["rows"]:
        print(f"m = {row['m']:.0e}:  remainder {row['r_m']:.3e},  "
              f"halving ratio {row['ratio']:.3f}")
    print(f"leading-coefficient estimate {rep['mlnm_coefficient']:.4f} "
          f"(target {rep['mlnm_coefficient_target']:.4f})")
    print(f"frozen-mean corrector residual of zero surface: "
          f"{rep['phi1_zero_residual']:.1e}")
    print(f"wrote {out}/expansion.csv")
    return 0


def _cmd_train(args, cfg, out, tag):
    tc = cfg.train
    if args.episodes is not None or args.mode is not None:
        tc = ac.TrainConfig(episodes=args.episodes or tc.episodes,
                            batch_n=tc.batch_n, lr_exponent=tc.lr_exponent,
                            seed=tc.seed, mode=args.mode or tc.mode,
                            grad_clip=tc.grad_clip)
    psi, theta, hist = ac.train(tc, cfg.market)
    hist.to_csv(os.path.join(out, "history.csv"), header_comment=tag)
    ac.save_checkpoint(os.path.join(out, "checkpoint.txt"), psi, theta,
                       tc.episodes, tc.seed, tc.mode)
    half = min(500, len(hist) // 2) or 1
    print(f"mode {tc.mode}: {tc.episodes} episodes, batch {tc.batch_n}, "
          f"seed {tc.seed}, rejected {len(hist.rejected)}")
    print(f"psi   = {np.round(psi.as_array(), 5)}")
    print(f"theta = {np.round(theta.as_array(), 5)}")
    print(f"loss proxy first-{half} mean {hist.loss[:half].mean():.4e}, "
          f"last-{half} mean {hist.loss[-half:].mean():.4e}")
    print(f"wrote {out}/history.csv, {out}/checkpoint.txt")
    return 0


def _load_trained(args, cfg, out):
    path = args.checkpoint or os.path.join(out, "checkpoint.txt")
    if not os.path.exists(path):
        raise DomainError(f"no checkpoint at {path}; run `emport train` first")
    psi, theta, *_ = ac.load_checkpoint(path)
    return psi, theta


def _cmd_evaluate(args, cfg, out, tag):
    psi, theta = _load_trained(args, cfg, out)
    mode = args.mode or cfg.eval.mode
    n = args.n_test or cfg.eval.n_test
    rep = evaluation.evaluate(theta, psi, cfg.market, n, cfg.eval.seed, mode)
    print("\n".join(rep.lines()))
    evaluation.report_csv(os.path.join(out, f"eval_{mode}.csv"), [rep],
                          header_comment=tag)
    print(f"wrote {out}/eval_{mode}.csv")
    return 0


def _cmd_mc_curve(args, cfg, out, tag):
    psi, theta = _load_trained(args, cfg, out)
    mode = args.mode or cfg.eval.mode
    n = cfg.eval.n_test
    checkpoints = sorted({max(1, n // 10), n // 2, n})
    series = evaluation.mc_convergence_curve(theta, psi, cfg.market, n,
                                             checkpoints, cfg.eval.seed, mode)
    evaluation.curve_csv(os.path.join(out, "mc_curve.csv"), series,
                         header_comment=tag)
    for c, est, bench in series:
        print(f"n = {c:>8d}   E[U] = {est:.5f}   benchmark = {bench:.5f}   "
              f"gap = {est - bench:+.5f}")
    print(f"wrote {out}/mc_curve.csv")
    return 0


_COMMANDS = {
    "solve-classical": _cmd_solve_classical,
    "check-conditions": _cmd_check_conditions,
    "solve-hjb": _cmd_solve_hjb,
    "policy-iterate": _cmd_policy_iterate,
    "expansion-check": _cmd_expansion_check,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "mc-curve": _cmd_mc_curve,
}


def dispatch(argv) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _load_config(args)
        out = _out_dir(args, cfg)
        tag = f"config={config_hash(cfg)}"
        return _COMMANDS[args.command](args, cfg, out, tag)
    except (ConfigError, DomainError, classical.IntegrationError,
            classical.FitError, hjb.SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
