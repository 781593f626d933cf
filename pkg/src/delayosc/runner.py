"""Scenario execution: the three solution methods on one time grid.

``run_scenario`` integrates each selected method, writes one CSV per method
plus a grid-aligned comparison CSV; ``compare_methods`` reports maximum and
RMS deviations between methods, per delay interval and overall.  All methods
share the sampling grid (``round(tau/dt)`` samples per interval), so their
outputs align row by row.
"""

from __future__ import annotations

import os

import numpy as np

from .cascade import evolve_delayed
from .config import ScenarioConfig
from .dde import DdeProblem, integrate_dde
from .errors import GridMismatch
from .fock import DensityMatrix
from .moments import (
    generate_moment_system,
    integrate_moment_system,
    single_mode_coherent,
)
from .series import TimeSeries, fmt, write_csv
from .stability import c_curve, classify_stability


def dde_problem_for(config: ScenarioConfig) -> DdeProblem:
    """The mean-field delay equation matching a cascade scenario.

    Zero history reproduces the feedback-free first interval; the cubic
    damping mirrors the two-photon absorption rate.
    """
    params = config.cascade_params()
    alpha, beta = params.dde_rates()
    n_samples = max(1, round(config.tau / config.dt))
    fine = config.tau / (n_samples * config.substeps)
    return DdeProblem(alpha=alpha, beta=beta, tau=config.tau,
                      x0=config.alpha0, horizon=config.horizon, dt=fine,
                      gamma_non=config.gamma_non)


def run_dde(config: ScenarioConfig) -> TimeSeries:
    """Integrate the scenario's delay equation, sampled on the shared grid.

    Photon-number and quadrature columns are not defined for the classical
    solution and are reported as NaN.
    """
    tr = integrate_dde(dde_problem_for(config))
    values = tr.values[::config.substeps]
    times = tr.times[::config.substeps]
    n_samples = max(1, round(config.tau / config.dt))
    idx = np.arange(len(times))
    interval = np.minimum(np.maximum(idx - 1, 0) // n_samples, config.m_max)
    nan = np.full(len(times), np.nan)
    return TimeSeries.from_arrays(times, values, nan, nan, nan, interval)


def run_quantum(config: ScenarioConfig, budget_bytes=None) -> TimeSeries:
    params = config.cascade_params()
    initial = DensityMatrix.coherent(config.n_trunc, config.alpha0)
    budget = config.budget_bytes if budget_bytes is None else budget_bytes
    return evolve_delayed(params, config.m_max, config.n_trunc, initial,
                          dt=config.dt, budget_bytes=budget)


def run_moments(config: ScenarioConfig) -> TimeSeries:
    params = config.cascade_params()
    systems = [generate_moment_system(params, m, config.moment_order)
               for m in range(config.m_max + 1)]
    return integrate_moment_system(systems, config.tau, config.dt,
                                   single_mode_coherent(config.alpha0),
                                   substeps=config.substeps)


_RUNNERS = {"dde": run_dde, "quantum": run_quantum, "moments": run_moments}


def run_scenario(config: ScenarioConfig, out_dir=None, budget_bytes=None,
                 plots: bool = False) -> dict:
    """Run all selected methods and write their CSV files.

    Returns a mapping with the produced file paths under ``"files"`` and
    the TimeSeries per method under ``"series"``.
    """
    config.validate()
    out = out_dir or config.out_dir
    os.makedirs(out, exist_ok=True)
    series = {}
    files = []
    for method in config.method_list():
        if method == "quantum":
            ts = run_quantum(config, budget_bytes)
        else:
            ts = _RUNNERS[method](config)
        series[method] = ts
        if method == "dde":
            path = os.path.join(out, "%s_dde.csv" % config.name)
            rows = zip(ts.t, ts.a.real, ts.a.imag)
            write_csv(path, ("t", "re_x", "im_x"), rows)
        else:
            path = os.path.join(out, "%s_%s.csv" % (config.name, method))
            ts.to_csv(path)
        files.append(path)
    if len(series) >= 2:
        path = os.path.join(out, "%s_comparison.csv" % config.name)
        _write_comparison(path, config, series)
        files.append(path)
    if plots:
        from .plotsvg import line_chart

        methods = list(series)
        grid = series[methods[0]].t
        path = os.path.join(out, "%s_re_a.svg" % config.name)
        line_chart(path, grid,
                   [(m, series[m].a.real) for m in methods],
                   title="%s: mean field (real part)" % config.name,
                   x_label="t", y_label="Re <a>")
        files.append(path)
        quantum_like = [m for m in methods if m != "dde"]
        if quantum_like:
            path = os.path.join(out, "%s_energy.svg" % config.name)
            m0 = quantum_like[0]
            line_chart(path, grid,
                       [("n (%s)" % m0, series[m0].n),
                        ("dX (%s)" % m0, series[m0].dx),
                        ("dP (%s)" % m0, series[m0].dp)],
                       title="%s: photon number and quadratures" % config.name,
                       x_label="t")
            files.append(path)
    return {"files": files, "series": series}


def _check_grids(series: dict) -> np.ndarray:
    grids = [ts.t for ts in series.values()]
    base = min(grids, key=len)
    for g in grids:
        ratio = (len(g) - 1) / (len(base) - 1) if len(base) > 1 else 1.0
        if abs(ratio - round(ratio)) > 1e-9:
            raise GridMismatch("sampling grids have non-integer ratio %g"
                               % ratio)
        step = int(round(ratio))
        if np.abs(g[::step][:len(base)] - base).max() > 1e-9 * max(base[-1], 1):
            raise GridMismatch("sampling grids do not align")
    return base


def _write_comparison(path, config: ScenarioConfig, series: dict) -> None:
    base = _check_grids(series)
    header = ["t"]
    cols = [base]
    for method, ts in series.items():
        step = int(round((len(ts.t) - 1) / (len(base) - 1))) if len(base) > 1 \
            else 1
        header += ["re_a_%s" % method, "im_a_%s" % method]
        cols += [ts.a.real[::step][:len(base)], ts.a.imag[::step][:len(base)]]
    write_csv(path, header, zip(*cols))


def compare_methods(config: ScenarioConfig, out_dir=None, budget_bytes=None,
                    series: dict | None = None) -> dict:
    """Align selected methods on the shared grid and report deviations.

    Returns a flat report dict (also written as ``<name>_report.txt`` in
    key=value form) with max and RMS deviations of the mean field per
    method pair, per interval and overall.
    """
    config.validate()
    if len(config.method_list()) < 2:
        raise ValueError("compare needs at least two methods")
    out = out_dir or config.out_dir
    os.makedirs(out, exist_ok=True)
    if series is None:
        series = run_scenario(config, out_dir=out,
                              budget_bytes=budget_bytes)["series"]
    base = _check_grids(series)
    n_samples = max(1, round(config.tau / config.dt))
    report = {"scenario": config.name}
    methods = list(series)
    for i, m1 in enumerate(methods):
        for m2 in methods[i + 1:]:
            a1 = series[m1].a
            a2 = series[m2].a
            dev = np.abs(a1 - a2)
            pair = "%s_vs_%s" % (m1, m2)
            report["%s_max_da" % pair] = dev.max()
            report["%s_rms_da" % pair] = float(np.sqrt((dev ** 2).mean()))
            for m in range(config.m_max + 1):
                lo, hi = m * n_samples + (m > 0), (m + 1) * n_samples + 1
                report["%s_max_da_interval_%d" % (pair, m)] = dev[lo:hi].max()
            both_n = not (np.isnan(series[m1].n).any()
                          or np.isnan(series[m2].n).any())
            if both_n:
                dn = np.abs(series[m1].n - series[m2].n)
                report["%s_max_dn" % pair] = dn.max()
    path = os.path.join(out, "%s_report.txt" % config.name)
    with open(path, "w", newline="\n") as fh:
        for key in sorted(report):
            value = report[key]
            fh.write("%s=%s\n" % (key, value if isinstance(value, str)
                                  else fmt(value)))
    report["report_path"] = path
    return report


def summarize_report(report: dict) -> str:
    lines = ["comparison for scenario %r:" % report.get("scenario", "?")]
    for key in sorted(report):
        if key.endswith("_max_da"):
            pair = key[:-7].replace("_vs_", " vs ")
            lines.append("  %-22s max |d<a>| = %s   rms = %s"
                         % (pair, fmt(report[key]),
                            fmt(report[key[:-7] + "_rms_da"])))
    return "\n".join(lines)


def export_stability_chart(out_dir, branches: int = 3, n_samples: int = 400,
                           alpha_range=(-5.0, 2.0), beta_range=(-6.0, 2.0),
                           grid_n: int = 41, plots: bool = False) -> list:
    """Write boundary-curve samples and a classification grid as CSV."""
    os.makedirs(out_dir, exist_ok=True)
    files = []
    curves = []
    for j in range(branches):
        curve = c_curve(j, n_samples)
        path = os.path.join(out_dir, "stability_c%d.csv" % j)
        curve.to_csv(path)
        files.append(path)
        curves.append(curve)
    grid_path = os.path.join(out_dir, "stability_grid.csv")
    rows = []
    for ap in np.linspace(alpha_range[0], alpha_range[1], grid_n):
        for bp in np.linspace(beta_range[0], beta_range[1], grid_n):
            rows.append((ap, bp, classify_stability(ap, bp)))
    with open(grid_path, "w", newline="\n") as fh:
        fh.write("alpha_prime,beta_prime,classification\n")
        for ap, bp, label in rows:
            fh.write("%s,%s,%s\n" % (fmt(ap), fmt(bp), label))
    files.append(grid_path)
    if plots:
        from .plotsvg import line_chart

        path = os.path.join(out_dir, "stability_curves.svg")
        # clip the diverging tails so the chart stays readable
        sel = [np.abs(c.beta_prime) < 12 for c in curves]
        line_chart(path, curves[0].alpha_prime[sel[0]],
                   [("C0", curves[0].beta_prime[sel[0]])],
                   title="oscillation boundary C0",
                   x_label="alpha'", y_label="beta'")
        files.append(path)
    return files
