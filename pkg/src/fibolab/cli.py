"""fibolab command line: one subcommand per experiment, plus ``all``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import _kernels
from .config import ConfigError, ExperimentConfig, load_config
from .conjugacy import fit_singularity_order
from .kneading import (
    BracketLoss,
    fib_cut_times,
    fibonacci_kneading_array,
    golden_lambda,
    golden_payload,
    itinerary,
    solve_fibonacci_report,
    TentParams,
)
from .lab import Lab
from .lyapunov import alpha_star, logdist_terms, negative_part_growth, pointwise_series, positive_part_terms
from .measure import check_identities, empirical_frequencies, measure_recursion
from .natext import backward_series, gap, windows_ok
from .numerics import Ball, PrecisionCeiling, Unresolved, phi_ball
from .postcritical import Side, build_partition, diameter_stats, verify_combinatorics
from .recurrence import (
    annulus_checks,
    closest_returns,
    decreasing_per_side,
    exponential_recurrence_estimate,
    fit_theta,
    recurrence_scan,
    sandwich_holds,
    sides_follow_rule,
)
from .report import NOT_APPLICABLE, SeriesReport, build_timestamp, write_json

log = logging.getLogger("fibolab")

EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_PRECISION = 3


@dataclass
class Outcome:
    checks: list = field(default_factory=list)  # (name, ok, detail)
    files: list = field(default_factory=list)

    def check(self, name: str, ok, detail: str = "") -> None:
        self.checks.append((name, bool(ok), detail))

    @property
    def ok(self) -> bool:
        return all(c[1] for c in self.checks)


def _report(lab: Lab, name: str, columns: list) -> SeriesReport:
    meta = lab.metadata()
    ts = build_timestamp()
    if ts:
        meta["timestamp"] = ts
    return SeriesReport(name, columns, metadata=meta)


def _emit(lab: Lab, out: Outcome, rep: SeriesReport) -> None:
    out.files.extend(str(p) for p in rep.write(lab.cfg.output_dir))


def _f(x) -> str:
    return f"{float(x):.6g}"


# ---------------------------------------------------------------------------


def cmd_solve_lambda(lab: Lab) -> Outcome:
    cfg = lab.cfg
    out = Outcome()
    t0 = time.perf_counter()
    rep = solve_fibonacci_report(cfg.prefix_depth_k, max_precision=cfg.max_precision, method=cfg.solve_method)
    log.info("solved in %.1f s, %d bits", time.perf_counter() - t0, rep.max_bits_used)
    lam = rep.params.lambda_
    s = fib_cut_times(cfg.prefix_depth_k + 2)
    n = s[min(14, cfg.prefix_depth_k)]
    it = itinerary(rep.params, Ball.exact(0, lam.precision_bits), n, max_precision=cfg.max_precision)
    target = "".join(map(str, fibonacci_kneading_array(n)[:n]))
    stored = golden_lambda(verify=False).lambda_
    payload = golden_payload(rep)
    payload.update(
        {
            "config_hash": cfg.hash(),
            "max_bits_used": rep.max_bits_used,
            "steps": rep.steps,
            "agrees_with_stored": lam.overlaps(stored),
        }
    )
    ts = build_timestamp()
    if ts:
        payload["timestamp"] = ts
    out.files.append(str(write_json(Path(cfg.output_dir) / "lambda_f.json", payload)))
    out.check("solve.near_1.73", abs(lam - Ball.exact("1.73")).upper() < 0.01, f"lambda={lam.mid_str(20)}")
    out.check("solve.itinerary_S(14)", it.certified and str(it) == target, f"{n} symbols")
    out.check("solve.matches_stored", payload["agrees_with_stored"], "ball overlaps the stored slope")
    return out


def cmd_combinatorics(lab: Lab) -> Outcome:
    out = Outcome()
    k = lab.cfg.comb_k_max
    rep = verify_combinatorics(lab.cache, lab.s, k)
    sr = _report(lab, "combinatorics", ["claim", "key", "value"])
    for (claim, key), v in sorted(rep.claims.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        sr.add(claim=claim, key=key, value="unresolved" if v is None else v)
    _emit(lab, out, sr)
    out.check("combinatorics.all_certified", rep.all_true(), f"{len(rep.claims)} claims, k<={k}")
    out.check("combinatorics.zero_unresolved", not rep.unresolved, f"{len(rep.unresolved)} unresolved")
    return out


def cmd_diameters(lab: Lab) -> Outcome:
    out = Outcome()
    st = diameter_stats(lab.cache, lab.s, lab.cfg.k_max)
    sr = _report(lab, "diameters", ["k", "S_k", "D", "D_err", "nu", "nu_err", "C", "C_err", "L", "L_err", "identity_residual", "identity_residual_err"])
    for r in st.rows:
        res = st.identity_residuals.get(r.k, NOT_APPLICABLE)
        sr.add(k=r.k, S_k=r.s_k, D=r.d, nu=r.nu or NOT_APPLICABLE, C=r.c_ratio or NOT_APPLICABLE, L=r.L, identity_residual=res)
    _emit(lab, out, sr)
    Ls = [st.by_k(k).L for k in range(10, min(14, lab.cfg.k_max) + 1)]
    spread = max(float(abs(a / b - 1)) for a in Ls for b in Ls)
    out.check("diameters.L_spread", spread < 1e-2, f"spread={spread:.3g}")
    cs = [r.c_ratio for r in st.rows if r.c_ratio is not None and r.k >= 1]
    out.check("diameters.C_nondecreasing", all(b.certified_lt(a) is not True for a, b in zip(cs, cs[1:])))
    out.check(
        "diameters.identity",
        all(v.contains(0) for k, v in st.identity_residuals.items() if 2 <= k <= 14),
        f"{len(st.identity_residuals)} k values",
    )
    print(f"beta ~ {st.beta_estimate.mid_str(15)} +/- {st.beta_estimate.rad_str()}")
    return out


def cmd_measure(lab: Lab) -> Outcome:
    out = Outcome()
    tab = measure_recursion(40)
    ids = check_identities(tab, lab.s)
    si = _report(lab, "measure_identities", ["m", "normalisation", "split", "shift", "closed_form"])
    for m, row in ids.items():
        si.add(m=m, **row)
    _emit(lab, out, si)
    out.check("measure.exact_identities", all(all(r.values()) for r in ids.values()), "m<=40")
    sr = _report(lab, "measure", ["m", "mu_I_exact", "mu_J_exact", "mu_I", "mu_I_err", "empirical_I", "empirical_J", "unresolved"])
    N = lab.cfg.N_empirical
    worst, unres = 0.0, 0.0
    for m in range(1, 7):
        level = build_partition(lab.cache, lab.s, m)
        fr = empirical_frequencies(lab.cache, level, N)
        fi = fr.freq(str(level.by_label("I", 0).label))
        fj = fr.freq(str(level.by_label("J", 0).label))
        worst = max(worst, abs(fi / float(tab.mu_I[m]) - 1))
        unres = max(unres, fr.unresolved_fraction)
        sr.add(m=m, mu_I_exact=tab.mu_I[m], mu_J_exact=tab.mu_J[m], mu_I=tab.mu_I[m].to_ball(), empirical_I=fi, empirical_J=fj, unresolved=fr.unresolved_fraction)
    _emit(lab, out, sr)
    phi = phi_ball()
    print(f"mu(I_1) = 1/phi = {(1 / phi).mid_str(20)}   mu(J_1) = 1/phi^2 = {(1 / phi ** 2).mid_str(20)}")
    out.check("measure.empirical_5pct", worst < 0.05, f"worst rel dev={worst:.3g}, N={N}, backend={_kernels.backend()}")
    out.check("measure.unresolved_cap", unres < lab.cfg.unresolved_cap, f"{unres:.3g}")
    return out


def cmd_singularity(lab: Lab) -> Outcome:
    out = Outcome()
    tp = lab.params
    sr = _report(lab, "singularity_fit", ["side", "log_dist", "log_fprime", "fitted_slope", "expected_slope"])
    tp256 = TentParams(tp.lambda_.with_precision(256), tp.prefix_depth)
    for side in (Side.RIGHT, Side.LEFT):
        fit = fit_singularity_order(lab.conj, tp256, side)
        for ld, lf in zip(fit.log_dist, fit.log_fprime):
            sr.add(side=side.name, log_dist=float(ld), log_fprime=float(lf), fitted_slope=fit.slope, expected_slope=fit.expected)
        decades = (fit.log_dist[0] - fit.log_dist[-1]) / 2.302585092994046
        out.check(f"singularity.{side.name.lower()}", fit.error < 1e-2 and decades >= 4, f"slope={fit.slope:.5f} expected={fit.expected:.5f}")
    _emit(lab, out, sr)
    return out


def cmd_prop1(lab: Lab) -> Outcome:
    out = Outcome()
    s, conj, cache = lab.s, lab.conj, lab.cache
    K = lab.cfg.k_max + 2
    nr = range(8, K + 1)
    pos = positive_part_terms(conj, cache, nr, s)
    ld = logdist_terms(conj, cache, nr, s)
    sr = _report(lab, "prop1_terms", ["n", "kind", "side", "term", "term_err", "partial_sum", "partial_sum_err"])
    for kind, terms in (("pos", pos), ("logdist", ld)):
        for t in terms:
            sr.add(n=t.n, kind=kind, side=t.side.name, term=t.term, partial_sum=t.partial_sum)
    _emit(lab, out, sr)
    lam_log = lab.cocycle.log_lambda
    out.check("prop1.pos_positive", all(t.term.lower() > 0 for t in pos))
    low = min(pos, key=lambda t: t.term.center)
    out.check("prop1.pos_floor_0.1", all(t.term.lower() >= 0.1 for t in pos), f"min term {_f(low.term)} at n={low.n} ({low.side.name})")
    out.check("prop1.pos_sums_increasing", all(b.partial_sum.certified_gt(a.partial_sum) for a, b in zip(pos, pos[1:])))
    out.check("prop1.pos_sum_exceeds_1", pos[-1].partial_sum.lower() > 1, f"sum={_f(pos[-1].partial_sum)}")
    out.check("prop1.logdist_positive", all(t.term.lower() > 0 for t in ld))
    out.check("prop1.logdist_sums_increasing", all(b.partial_sum.certified_gt(a.partial_sum) for a, b in zip(ld, ld[1:])))
    ratios = [float(t.term / (t.mu * conj.a(t.side) * s[t.n] * lam_log)) for t in ld]
    out.check("prop1.logdist_scale", all(0.5 <= r <= 2 for r in ratios), f"ratios {min(ratios):.3f}..{max(ratios):.3f}")
    N = s[K]
    ng = negative_part_growth(conj, cache, N, s, cocycle=lab.cocycle)
    sn = _report(lab, "prop1_negative", ["j", "value", "value_err", "at_cut_minus_one"])
    cuts = {s[k] - 1 for k in range(0, K + 3)}
    for j, v in ng.records:
        sn.add(j=j, value=v, at_cut_minus_one=j in cuts)
    _emit(lab, out, sn)
    vals = [v for _, v in ng.records]
    out.check("prop1.neg_records_increasing", all(b.certified_gt(a) for a, b in zip(vals, vals[1:])), f"{len(vals)} records to N={N}")
    at_cut = sum(1 for j in ng.record_indices() if j in cuts)
    out.check(
        "prop1.neg_records_cluster",
        2 * at_cut > len(vals) and ng.record_indices()[-1] in cuts,
        f"{at_cut}/{len(vals)} at S(k)-1, last at {ng.record_indices()[-1]}",
    )
    a_hi, a_lo = ng.averages.get(s[K]), ng.averages.get(s[10])
    out.check("prop1.neg_average_grows", a_hi is not None and a_lo is not None and a_hi.certified_gt(a_lo), f"{_f(a_lo)} -> {_f(a_hi)}")
    out.check("prop1.zero_unresolved", not ng.unresolved)
    return out


def cmd_prop2(lab: Lab) -> Outcome:
    out = Outcome()
    conj = lab.conj
    ps = pointwise_series(conj, lab.cache, 1, 4, lab.cfg.depth, lab.s, cocycle=lab.cocycle)
    sr = _report(lab, "prop2_series", ["n", "a_n", "a_n_err", "classification"])
    for e in ps.entries:
        sr.add(n=e.n, a_n=e.a_n, classification=e.tag)
    _emit(lab, out, sr)
    ll = lab.cocycle.log_lambda
    phi = phi_ball(ll.precision_bits)
    far, close = ps.max_far, ps.min_close
    bound = (1 - alpha_star(conj) / phi) * ll + Ball.exact("0.1")
    out.check("prop2.far_max", far.a_n.upper() >= (ll - Ball.exact("0.05")).lower(), f"max a_n={_f(far.a_n)} at n={far.n}")
    out.check("prop2.close_min", close.a_n.lower() <= bound.upper(), f"min a_n={_f(close.a_n)} at n={close.n}, bound {_f(bound)}")
    out.check("prop2.gap", (far.a_n - close.a_n).lower() >= 0.15, f"gap={_f(far.a_n - close.a_n)}")
    out.check("prop2.return_windows", all(ps.window_ok.values()), f"returns {ps.returns} after entry l={ps.l}")
    return out


def cmd_recurrence(lab: Lab) -> Outcome:
    out = Outcome()
    conj, s = lab.conj, lab.s
    K = lab.cfg.k_max + 2
    rows = closest_returns(conj, lab.cache, K, s)
    ll = lab.cocycle.log_lambda
    theta = fit_theta(conj, rows, ll, s)
    sr = _report(lab, "recurrence", ["k", "S_k", "side", "dist", "dist_err", "exponent", "exponent_err", "sandwich_lo", "sandwich_lo_err", "sandwich_hi", "sandwich_hi_err"])
    lt = theta.log()
    for r in rows:
        lo = NOT_APPLICABLE if r.sandwich_lo is None else (r.sandwich_lo - lt).exp()
        hi = NOT_APPLICABLE if r.sandwich_hi is None else (r.sandwich_hi + lt).exp()
        sr.add(k=r.k, S_k=r.s_k, side=r.side.name, dist=r.dist, exponent=r.exponent, sandwich_lo=lo, sandwich_hi=hi)
    _emit(lab, out, sr)
    out.check("recurrence.side_rule", sides_follow_rule(rows))
    out.check("recurrence.decreasing_per_side", decreasing_per_side(rows))
    sel = [r for r in rows if 10 <= r.k <= lab.cfg.k_max]
    out.check(
        "recurrence.ratio_0.9_1.1",
        all(0.9 <= r.ratio.lower() and r.ratio.upper() <= 1.1 for r in sel),
        " ".join(f"{r.k}:{float(r.ratio):.4f}" for r in sel),
    )
    out.check("recurrence.sandwich", sandwich_holds(rows, theta), f"Theta={_f(theta)}")
    ar = annulus_checks(conj, lab.cache, range(8, min(14, K - 1)), s)
    out.check("recurrence.telescoping", all(v.contains(0) for v in ar.telescoping.values()) and ar.equal_sides)
    out.check("recurrence.annulus_sandwich", ar.sandwich_ok, f"Q={_f(ar.q_fit)}")
    n_max = s[lab.cfg.k_max]
    est = exponential_recurrence_estimate(rows, n_max)
    scan = recurrence_scan(conj, lab.cache, n_max)
    cut = {s[k] for k in range(0, K + 1)}
    out.check(
        "recurrence.estimate",
        est.value.lower() > 0 and scan.n in cut and scan.n == est.n,
        f"{_f(est.value)} at n={est.n}, window {n_max}",
    )
    return out


def cmd_backward(lab: Lab) -> Outcome:
    out = Outcome()
    conj, s = lab.conj, lab.s
    m, depth = s[lab.cfg.k_max + 2], s[lab.cfg.k_max - 2]
    ch = backward_series(conj, lab.cache, m, depth, 4, s)
    sr = _report(lab, "backward", ["n", "b_n", "b_n_err", "tag"])
    for e in ch.entries:
        sr.add(n=e.n, b_n=e.b_n, tag=e.tag)
    _emit(lab, out, sr)
    ll = lab.cocycle.log_lambda
    astar = alpha_star(conj)
    mn, tm = ch.window_min, ch.tagged_max
    out.check("backward.min_near_loglam", mn.b_n.lower() <= (ll + Ball.exact("0.05")).upper(), f"min b_n={_f(mn.b_n)} at n={mn.n}")
    target = (1 + astar) * ll - Ball.exact("0.1")
    out.check(
        "backward.tagged_max",
        tm is not None and tm.b_n.upper() >= target.lower(),
        f"anchor m={m}: max tagged b_n={_f(tm.b_n) if tm else 'none'} vs {_f(target)}",
    )
    out.check("backward.cocycle", all(r.contains(0) for r in ch.residuals))
    out.check("backward.windows", all(windows_ok(ch, s).values()), f"t={ch.t}, returns {ch.returns}")
    out.check("backward.gap", gap(ch).lower() >= (astar * ll - Ball.exact("0.2")).upper())
    return out


COMMANDS = {
    "solve-lambda": cmd_solve_lambda,
    "combinatorics": cmd_combinatorics,
    "diameters": cmd_diameters,
    "measure": cmd_measure,
    "singularity": cmd_singularity,
    "prop1": cmd_prop1,
    "prop2": cmd_prop2,
    "recurrence": cmd_recurrence,
    "backward": cmd_backward,
}


def _print_checks(name: str, out: Outcome, elapsed: float) -> None:
    for check, ok, detail in out.checks:
        print(f"{'PASS' if ok else 'FAIL'}  {check:34s} {detail}")
    log.info("%s done in %.2f s", name, elapsed)


def run(command: str, cfg: ExperimentConfig) -> int:
    lab = Lab(cfg)
    names = list(COMMANDS) if command == "all" else [command]
    summary = {"config_hash": cfg.hash(), "commands": {}}
    status = 0
    for name in names:
        t0 = time.perf_counter()
        try:
            out = COMMANDS[name](lab)
        except (PrecisionCeiling, Unresolved, BracketLoss) as exc:
            print(f"FAIL  {name}: {type(exc).__name__}: {exc}")
            summary["commands"][name] = {"error": f"{type(exc).__name__}: {exc}"}
            status = max(status, EXIT_PRECISION)
            continue
        _print_checks(name, out, time.perf_counter() - t0)
        summary["commands"][name] = {
            "ok": out.ok,
            "checks": [{"name": c, "ok": ok, "detail": d} for c, ok, d in out.checks],
            "files": sorted(Path(f).name for f in out.files),
        }
        if not out.ok:
            status = max(status, EXIT_FAIL)
    summary["lambda_digits"] = lab.lambda_digits() if "params" in lab.__dict__ else None
    ts = build_timestamp()
    if ts:
        summary["timestamp"] = ts
    if command == "all":
        write_json(Path(cfg.output_dir) / "summary.json", summary)
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fibolab", description="Fibonacci tent map / Lorenz-like conjugacy experiments")
    ap.add_argument("command", choices=[*COMMANDS, "all"])
    ap.add_argument("--config", help="key=value config file")
    ap.add_argument("--a-plus", dest="a_plus")
    ap.add_argument("--a-minus", dest="a_minus")
    ap.add_argument("--depth-k", dest="prefix_depth_k", type=int, help="kneading prefix depth for the slope")
    ap.add_argument("--bits", dest="max_precision", type=int, help="precision ceiling in bits")
    ap.add_argument("--out", dest="output_dir")
    ap.add_argument("--lambda-source", dest="lambda_source", choices=["golden", "solve"])
    ap.add_argument("--method", dest="solve_method", choices=["newton", "bisect"])
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    over = {k: getattr(args, k) for k in ("a_plus", "a_minus", "prefix_depth_k", "max_precision", "output_dir", "lambda_source", "solve_method")}
    try:
        cfg = load_config(args.config, **over)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
