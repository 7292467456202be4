"""Command-line front end: scenario configs, pipeline runs, verification.

Scenario files are flat structured text (``key = value`` entries under
bracketed sections) parsed with :mod:`configparser`:

    [plant]
    # either inline coefficients ...
    n = 1
    m = 1
    p = 1
    a = -1.0          # SISO shorthand: a_1 .. a_n
    b = 1.0           # SISO shorthand: b_1 .. b_n
    # ... or row-major blocks A1..An / B1..Bn (rows separated by ';'),
    # or `file = path` pointing at a document with the same [plant] section.
    # Optional: x0 = <h floats> (default: drawn from the excitation seed).

    [filter]
    c = 1.0           # c_1 .. c_n, s^n + c_1 s^(n-1) + ... + c_n Hurwitz
    beta = 0.5

    [excitation]
    seed = 2
    ts = 0.3
    amplitude = 1.0
    # samples = 12    # optional override of the default recipe length
    # pe_order = 6    # optional override of the default excitation order
    # kind = random   # or `constant` (degenerate input, for failure demos)

    [annihilator]
    route = uniform-fir   # or general-nullspace

    [numerics]
    # optional NumericPolicy field overrides, e.g. rank_tol = 0.0

    [output]
    dir = out
    # test_mode = true  # embed the model-based verification report

Subcommands: ``run``, ``verify``, ``sweep``, ``demo``.  Exit codes:
0 success, 1 configuration error, 2 rank-gate failure, 3 LMI
infeasible; ``verify`` exits 4 when any check fails.
"""

import argparse
import concurrent.futures
import configparser
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import excite, filterbank, matkit, oracle, plant, synth
from .errors import (
    AssumptionError,
    ConfigError,
    ExcitationError,
    IostabError,
    ModelError,
)
from .matkit import DEFAULT_POLICY, NumericPolicy

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RANK = 2
EXIT_INFEASIBLE = 3
EXIT_VERIFY = 4

ROUTES = ("uniform-fir", "general-nullspace")


@dataclasses.dataclass
class Scenario:
    """Fully resolved run configuration."""

    model: plant.DiffOpModel
    c: np.ndarray
    beta: float
    seed: int
    ts: float
    amplitude: float
    count: int
    pe_order: int
    kind: str
    route: str
    x0: np.ndarray | None
    policy: NumericPolicy
    out_dir: str
    test_mode: bool


def _parse_floats(text, key):
    try:
        return np.array([float(v) for v in text.split()])
    except ValueError as exc:
        raise ConfigError(f"non-numeric entry in {key}: {exc}") from exc


def load_scenario(path, out_override=None):
    """Parse and resolve a scenario configuration file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read scenario file {path}")
    if "plant" not in parser:
        raise ConfigError("missing [plant] section")
    plant_section = dict(parser["plant"])
    if "file" in plant_section:
        ref = plant_section["file"]
        if not os.path.isabs(ref):
            ref = os.path.join(os.path.dirname(os.path.abspath(path)), ref)
        sub = configparser.ConfigParser(inline_comment_prefixes=("#",))
        if not sub.read(ref):
            raise ConfigError(f"referenced plant file {ref} does not exist")
        if "plant" not in sub:
            raise ConfigError(f"plant file {ref} lacks a [plant] section")
        x0_text = plant_section.get("x0")
        plant_section = dict(sub["plant"])
        if x0_text is not None:
            plant_section["x0"] = x0_text
    try:
        model = plant.model_from_mapping(plant_section)
    except ModelError as exc:
        raise ConfigError(f"invalid plant description: {exc}") from exc

    if "filter" not in parser:
        raise ConfigError("missing [filter] section")
    filt = parser["filter"]
    if "c" not in filt or "beta" not in filt:
        raise ConfigError("[filter] needs keys c and beta")
    c = _parse_floats(filt["c"], "filter.c")
    if c.size != model.n:
        raise ConfigError(f"filter.c must list n = {model.n} coefficients")
    try:
        beta = float(filt["beta"])
    except ValueError as exc:
        raise ConfigError(f"filter.beta must be a number: {exc}") from exc

    exc_sec = parser["excitation"] if "excitation" in parser else {}
    try:
        seed = int(exc_sec.get("seed", "0"))
        ts = float(exc_sec.get("ts", "0.3"))
        amplitude = float(exc_sec.get("amplitude", "1.0"))
    except ValueError as err:
        raise ConfigError(f"bad [excitation] value: {err}") from err
    if ts <= 0:
        raise ConfigError("excitation.ts must be positive")
    if amplitude <= 0:
        raise ConfigError("excitation.amplitude must be positive")
    pe_order = exc_sec.get("pe_order")
    count = exc_sec.get("samples")
    kind = exc_sec.get("kind", "random")
    if kind not in ("random", "constant"):
        raise ConfigError(f"excitation.kind must be random or constant, got {kind}")
    order = (
        int(pe_order)
        if pe_order is not None
        else excite.default_pe_order(model.n, model.m, model.p)
    )
    n_samples = (
        int(count)
        if count is not None
        else excite.default_sample_count(model.n, model.m, order)
    )
    if n_samples < model.n + 2:
        raise ConfigError(f"excitation.samples must be at least n + 2 = {model.n + 2}")

    route = "uniform-fir"
    if "annihilator" in parser:
        route = parser["annihilator"].get("route", route)
    if route not in ROUTES:
        raise ConfigError(f"annihilator.route must be one of {ROUTES}, got {route}")

    policy_kwargs = {}
    if "numerics" in parser:
        valid = {f.name for f in dataclasses.fields(NumericPolicy)}
        for key, value in parser["numerics"].items():
            if key not in valid:
                raise ConfigError(f"unknown numerics key {key}")
            try:
                policy_kwargs[key] = float(value)
            except ValueError as err:
                raise ConfigError(f"bad numerics value for {key}: {err}") from err
    policy = NumericPolicy(**policy_kwargs) if policy_kwargs else DEFAULT_POLICY

    x0 = None
    if "x0" in plant_section:
        x0 = _parse_floats(plant_section["x0"], "plant.x0")
        if x0.size != model.p * model.n:
            raise ConfigError(f"plant.x0 must have length p*n = {model.p * model.n}")

    out_dir = "out"
    test_mode = True
    if "output" in parser:
        out_dir = parser["output"].get("dir", out_dir)
        test_mode = parser["output"].getboolean("test_mode", fallback=True)
    if out_override is not None:
        out_dir = out_override

    return Scenario(
        model=model, c=c, beta=beta, seed=seed, ts=ts, amplitude=amplitude,
        count=n_samples, pe_order=order, kind=kind, route=route, x0=x0,
        policy=policy, out_dir=out_dir, test_mode=test_mode,
    )


def scenario_echo(scn):
    """Primitive-typed echo of the resolved scenario for reports."""
    model = scn.model
    return {
        "plant": {
            "n": model.n,
            "m": model.m,
            "p": model.p,
            "a_coefs": [Ai.tolist() for Ai in model.a_coefs],
            "b_coefs": [Bi.tolist() for Bi in model.b_coefs],
            "x0": None if scn.x0 is None else [float(v) for v in scn.x0],
        },
        "filter": {"c": [float(v) for v in scn.c], "beta": scn.beta},
        "excitation": {
            "seed": scn.seed,
            "ts": scn.ts,
            "amplitude": scn.amplitude,
            "samples": scn.count,
            "pe_order": scn.pe_order,
            "kind": scn.kind,
        },
        "annihilator": {"route": scn.route},
        "numerics": dataclasses.asdict(scn.policy),
        "output": {"dir": scn.out_dir, "test_mode": scn.test_mode},
    }


@dataclasses.dataclass
class Outcome:
    """Everything produced by one end-to-end pipeline execution."""

    status: str  # "feasible" | "infeasible" | "rank_failure"
    exit_code: int
    scenario: Scenario
    spec: filterbank.FilterSpec
    ss: plant.StateSpace
    plan: excite.ExcitationPlan
    record: filterbank.ExperimentRecord
    annihilator: excite.Annihilator
    fd: synth.FilteredData
    rank_passed: bool
    rank_achieved: int
    rank_target: int
    rank_diagnostics: dict
    x0: np.ndarray
    result: synth.SynthesisResult | None = None
    gain: np.ndarray | None = None
    stability: dict | None = None
    dynamics: oracle.FilterStateDynamics | None = None


def validate_scenario(scn):
    """Admissibility gates that must pass before any simulation starts."""
    plant.validate_model(scn.model, scn.policy)
    try:
        spec = filterbank.FilterSpec.for_model(scn.model, scn.c, scn.beta)
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    ss = plant.realize_observability_canonical(scn.model)
    if scn.model.is_siso:
        if not plant.check_c_nonresonant(scn.model.a, scn.c, scn.beta, scn.policy):
            raise ConfigError(
                "filter polynomial shares a root with the plant polynomial "
                "or with s + beta"
            )
    else:
        plant_eigs = matkit.spectrum(ss.A)
        filt_eigs = np.roots(spec.q_poly())
        if not excite.check_spectra_disjoint(plant_eigs, filt_eigs):
            raise ConfigError("plant and filter spectra overlap")
    ref_eigs = np.roots(spec.q_poly())
    plant_eigs = matkit.spectrum(ss.A)
    if not excite.check_sampling_pathology(
        [plant_eigs, ref_eigs], scn.beta, scn.ts, scn.policy
    ):
        raise ConfigError(
            f"sampling time {scn.ts} aliases the plant/filter spectra; choose "
            "a different ts"
        )
    return spec, ss


def run_scenario(scn):
    """Execute the full data-driven synthesis pipeline for a scenario."""
    spec, ss = validate_scenario(scn)
    if scn.kind == "constant":
        d = scn.amplitude * np.ones((scn.count, scn.model.m))
        plan = excite.ExcitationPlan(d=d, ts=scn.ts, order=0, seed=scn.seed)
    else:
        plan = excite.gen_pe_sequence(
            scn.seed, scn.model.m, scn.pe_order, scn.count, scn.ts,
            amplitude=scn.amplitude, policy=scn.policy,
        )
    if scn.x0 is not None:
        x0 = scn.x0
    else:
        # Separate deterministic stream so x0 is independent of the input draw.
        x0 = np.random.default_rng([scn.seed, 17]).standard_normal(ss.order)

    system = filterbank.assemble_experiment_system(ss, spec)
    record = filterbank.simulate_zoh(system, system.initial_state(x0), plan.d, scn.ts)
    if scn.route == "uniform-fir":
        ann = excite.fir_annihilator(spec, scn.ts, scn.count, scn.policy)
    else:
        ann = excite.nullspace_annihilator(spec, record.times[1:], scn.policy)
    dm = synth.assemble_data_matrices(record)
    fd = synth.filter_data(dm, ann).normalized()
    passed, achieved, target = synth.rank_gate(
        fd, scn.policy, n=scn.model.n, m=scn.model.m, p=scn.model.p
    )
    diagnostics = synth.rank_gate_diagnostics(fd)
    outcome = Outcome(
        status="rank_failure", exit_code=EXIT_RANK, scenario=scn, spec=spec,
        ss=ss, plan=plan, record=record, annihilator=ann, fd=fd,
        rank_passed=passed, rank_achieved=achieved, rank_target=target,
        rank_diagnostics=diagnostics, x0=np.asarray(x0, dtype=float),
    )
    if scn.test_mode:
        outcome.dynamics = oracle.build_filtered_dynamics(scn.model, spec, scn.policy)
    if not passed:
        return outcome

    result = synth.solve_stabilization_lmi(fd, scn.policy)
    outcome.result = result
    if result.status != "feasible":
        outcome.status = "infeasible"
        outcome.exit_code = EXIT_INFEASIBLE
        return outcome

    gain = synth.compute_gain(fd, result.Z, scn.policy)
    outcome.gain = gain
    outcome.stability = synth.verify_synthesis(scn.model, spec, gain, scn.policy)
    loop_eigs = np.sort_complex(outcome.stability["loop_eigs"])
    result.gain = gain
    result.closed_loop_eigs = loop_eigs
    outcome.status = "feasible"
    outcome.exit_code = EXIT_OK
    return outcome


def _eig_list(eigs):
    ordered = sorted(
        (complex(v) for v in np.atleast_1d(eigs)), key=lambda v: (v.real, v.imag)
    )
    return [{"re": float(v.real), "im": float(v.imag)} for v in ordered]


def multiset_distance(first, second):
    """Greedy nearest matching distance between two eigenvalue multisets."""
    a = sorted((complex(v) for v in np.atleast_1d(first)), key=lambda v: (v.real, v.imag))
    b = list(np.atleast_1d(second))
    if len(a) != len(b):
        return float("inf")
    worst = 0.0
    for va in a:
        dists = [abs(complex(va) - complex(vb)) for vb in b]
        k = int(np.argmin(dists))
        worst = max(worst, dists[k])
        b.pop(k)
    return float(worst)


def oracle_report(outcome):
    """Model-based verification block for reports (test mode)."""
    scn = outcome.scenario
    spec = outcome.spec
    policy = scn.policy
    dyn = outcome.dynamics or oracle.build_filtered_dynamics(scn.model, spec, policy)
    eps = oracle.epsilon_trajectory(spec, dyn, outcome.x0, outcome.record.times)
    consistency = oracle.delta_consistency_residual(outcome.record, dyn, eps, policy)
    E = eps[:, 1:]
    annihilation_value = float(np.max(np.abs(E @ outcome.annihilator.matrix)))
    annihilation_threshold = 1e-9 * max(float(np.linalg.norm(outcome.x0)), 1e-12)
    checks = {
        "delta_consistency": {
            "value": consistency.value,
            "threshold": consistency.threshold,
            "passed": consistency.passed,
        },
        "annihilation": {
            "value": annihilation_value,
            "threshold": annihilation_threshold,
            "passed": annihilation_value <= annihilation_threshold,
        },
        "reachable_pair": {"passed": dyn.reachable},
    }
    if outcome.rank_passed:
        A_est, B_est = synth.estimate_filter_dynamics(outcome.fd, policy)
        truth = np.hstack([dyn.A, dyn.B])
        err = float(
            np.linalg.norm(np.hstack([A_est, B_est]) - truth)
            / max(np.linalg.norm(truth), 1e-30)
        )
        checks["recovery_identity"] = {
            "value": err,
            "threshold": policy.recovery_rtol,
            "passed": err <= policy.recovery_rtol,
        }
    decomposition = oracle.verify_interconnection_decomposition(scn.model, spec, policy)
    checks["decomposition"] = [
        {"name": r.name, "value": r.value, "threshold": r.threshold, "passed": r.passed}
        for r in decomposition
    ]
    if outcome.gain is not None and outcome.stability is not None:
        ref = filterbank.build_companion(spec)
        expected = np.concatenate(
            [outcome.stability["direct_eigs"], matkit.spectrum(ref.A_output.T)]
        )
        dist = multiset_distance(expected, outcome.stability["loop_eigs"])
        checks["stabilizes_dynamics"] = {
            "value": outcome.stability["direct_max_re"],
            "threshold": -policy.stability_margin,
            "passed": outcome.stability["direct_max_re"] < -policy.stability_margin,
        }
        checks["stabilizes_loop"] = {
            "value": outcome.stability["loop_max_re"],
            "threshold": -policy.stability_margin,
            "passed": outcome.stability["loop_max_re"] < -policy.stability_margin,
        }
        checks["spectrum_match"] = {
            "value": dist,
            "threshold": policy.spectrum_tol,
            "passed": dist <= policy.spectrum_tol,
        }
    return checks


def synthesis_report(outcome, include_meta=True):
    """JSON-ready synthesis report; everything outside "meta" is deterministic."""
    res = outcome.result
    report = {
        "status": outcome.status,
        "exit_code": outcome.exit_code,
        "margin": None if res is None else res.margin,
        "strict_threshold": None if res is None else res.strict_threshold,
        "data_scale": float(outcome.fd.scale),
        "K_f": None if outcome.gain is None else [[float(v) for v in row]
                                                  for row in outcome.gain],
        "residuals": None if res is None else {
            "skew_norm": res.residuals["skew_norm"],
            "min_eig_P": res.residuals["min_eig_P"],
            "max_eig_He": res.residuals["max_eig_He"],
        },
        "closed_loop_eigs": None if res is None or res.closed_loop_eigs is None
        else _eig_list(res.closed_loop_eigs),
        "rank_gate": {
            "passed": bool(outcome.rank_passed),
            "achieved": int(outcome.rank_achieved),
            "target": int(outcome.rank_target),
            "diagnostics": outcome.rank_diagnostics,
        },
        "solver": None if res is None else {
            "barrier_stages": res.barrier_stages,
            "newton_steps": res.newton_steps,
        },
        "config_echo": scenario_echo(outcome.scenario),
    }
    if outcome.scenario.test_mode:
        report["oracle"] = oracle_report(outcome)
    if include_meta:
        report["meta"] = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    return report


def _summary_text(outcome):
    scn = outcome.scenario
    lines = [
        "data-driven output-feedback synthesis summary",
        f"plant: n={scn.model.n} m={scn.model.m} p={scn.model.p}",
        f"filter: c={np.array2string(scn.c, precision=6)} beta={scn.beta}",
        f"excitation: seed={scn.seed} ts={scn.ts} samples={scn.count} "
        f"pe_order={scn.pe_order} kind={scn.kind}",
        f"annihilator: route={scn.route} width={outcome.annihilator.width}",
        f"rank gate: achieved {outcome.rank_achieved} of target "
        f"{outcome.rank_target} -> {'pass' if outcome.rank_passed else 'FAIL'}",
    ]
    if not outcome.rank_passed:
        lines.append(
            "FAILURE: the rank condition is not met; the method cannot be "
            "applied to this dataset."
        )
        lines.append(f"smallest singular value: {outcome.rank_diagnostics['sigma_min']:.3e}")
    elif outcome.status == "infeasible":
        lines.append(
            f"stabilization program infeasible (margin {outcome.result.margin:.3e} "
            f"<= threshold {outcome.result.strict_threshold:.3e})"
        )
    else:
        res = outcome.result
        lines.append(f"feasibility margin: {res.margin:.6e} "
                     f"(threshold {res.strict_threshold:.3e})")
        lines.append("gain K_f: " + np.array2string(outcome.gain, precision=8))
        lines.append(
            f"closed-loop spectral abscissa: {outcome.stability['loop_max_re']:.6e}"
        )
        lines.append("verdict: stabilizing controller synthesized")
    return "\n".join(lines) + "\n"


def write_artifacts(outcome):
    out_dir = outcome.scenario.out_dir
    os.makedirs(out_dir, exist_ok=True)
    filterbank.write_trajectory_csv(outcome.record, os.path.join(out_dir, "trajectory.csv"))
    excite.write_annihilator_csv(outcome.annihilator, os.path.join(out_dir, "annihilator.csv"))
    with open(os.path.join(out_dir, "annihilator.json"), "w", encoding="utf-8") as fh:
        fh.write(excite.annihilator_sidecar_json(outcome.annihilator) + "\n")
    report = synthesis_report(outcome)
    with open(os.path.join(out_dir, "synthesis.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(_summary_text(outcome))


def cmd_run(args):
    try:
        scn = load_scenario(args.config, args.out)
    except (ConfigError, ModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        outcome = run_scenario(scn)
    except (ConfigError, AssumptionError, ModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExcitationError as exc:
        print(f"excitation failure: {exc}", file=sys.stderr)
        return EXIT_RANK
    write_artifacts(outcome)
    print(_summary_text(outcome), end="")
    return outcome.exit_code


def _verify_checks(outcome):
    """Flat list of (name, value, threshold, passed) tuples for verify."""
    checks = []
    rank_entry = (
        "rank_gate",
        float(outcome.rank_achieved),
        float(outcome.rank_target),
        outcome.rank_passed,
    )
    checks.append(rank_entry)
    report = oracle_report(outcome)
    for name, payload in report.items():
        if name == "decomposition":
            for item in payload:
                checks.append(
                    (f"decomposition.{item['name']}", item["value"],
                     item["threshold"], item["passed"])
                )
        elif name == "reachable_pair":
            checks.append((name, 1.0 if payload["passed"] else 0.0, 1.0,
                           payload["passed"]))
        else:
            checks.append((name, payload["value"], payload["threshold"],
                           payload["passed"]))
    if outcome.result is not None and outcome.status == "feasible":
        res = outcome.result
        checks.append(("lmi_margin", res.margin, res.strict_threshold,
                       res.margin > res.strict_threshold))
        checks.append(("lmi_skew", res.residuals["skew_norm"],
                       outcome.scenario.policy.skew_tol,
                       res.residuals["skew_norm"] <= outcome.scenario.policy.skew_tol))
    return checks


def cmd_verify(args):
    try:
        scn = load_scenario(args.config, args.out)
        outcome = run_scenario(scn)
    except (ConfigError, AssumptionError, ModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExcitationError as exc:
        print(f"excitation failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    checks = _verify_checks(outcome)
    all_passed = True
    for name, value, threshold, passed in checks:
        all_passed &= bool(passed)
        status = "PASS" if passed else "FAIL"
        print(f"{status} {name} value={value:.6e} threshold={threshold:.6e}")
    if outcome.status != "feasible":
        all_passed = False
        print(f"FAIL pipeline status={outcome.status}")
    return EXIT_OK if all_passed else EXIT_VERIFY


def _parse_axis(text):
    if "=" not in text:
        raise ConfigError("axis must be <name>=<start:stop[:step]>")
    name, spec_text = text.split("=", 1)
    name = name.strip()
    if name not in ("seed", "ts", "samples"):
        raise ConfigError(f"axis must be seed, ts, or samples, got {name}")
    parts = spec_text.split(":")
    if len(parts) not in (2, 3):
        raise ConfigError("axis range must be start:stop or start:stop:step")
    if name == "ts":
        start, stop = float(parts[0]), float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else 1.0
        values = list(np.arange(start, stop, step))
    else:
        start, stop = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
        values = list(range(start, stop, step))
    if not values:
        raise ConfigError("axis range is empty")
    return name, values


def _sweep_cell(config_path, axis_name, value):
    try:
        scn = load_scenario(config_path)
        if axis_name == "seed":
            scn = dataclasses.replace(scn, seed=int(value))
        elif axis_name == "ts":
            scn = dataclasses.replace(scn, ts=float(value))
        else:
            scn = dataclasses.replace(scn, count=int(value))
        outcome = run_scenario(scn)
        row = {
            "value": value,
            "status": outcome.status,
            "rank_pass": int(outcome.rank_passed),
            "margin": "" if outcome.result is None else f"{outcome.result.margin:.17g}",
            "max_re_closed_loop": ""
            if outcome.stability is None
            else f"{outcome.stability['loop_max_re']:.17g}",
        }
    except IostabError as exc:
        row = {"value": value, "status": f"error:{type(exc).__name__}",
               "rank_pass": 0, "margin": "", "max_re_closed_loop": ""}
    return row


def cmd_sweep(args):
    try:
        axis_name, values = _parse_axis(args.axis)
        scn = load_scenario(args.config, args.out)
    except (ConfigError, ModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    max_workers = os.cpu_count() or 1
    env_cap = os.environ.get("IOSTAB_NUM_THREADS")
    if env_cap is not None:
        try:
            max_workers = max(1, min(max_workers, int(env_cap)))
        except ValueError:
            print(f"ignoring malformed IOSTAB_NUM_THREADS={env_cap}", file=sys.stderr)
    rows = []
    if max_workers == 1 or len(values) == 1:
        for value in values:
            rows.append(_sweep_cell(args.config, axis_name, value))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(_sweep_cell, args.config, axis_name, v)
                       for v in values]
            rows = [f.result() for f in futures]
    os.makedirs(scn.out_dir, exist_ok=True)
    out_path = os.path.join(scn.out_dir, "sweep.csv")
    header = ["value", "status", "rank_pass", "margin", "max_re_closed_loop"]
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(",".join([axis_name] + header[1:]) + "\n")
        for row in rows:
            fh.write(",".join(str(row[k]) for k in header) + "\n")
    n_cells = len(rows)
    n_rank = sum(r["rank_pass"] for r in rows)
    n_feasible = sum(1 for r in rows if r["status"] == "feasible")
    print(f"sweep over {axis_name}: {n_cells} cells, rank-gate pass "
          f"{n_rank}/{n_cells}, feasible {n_feasible}/{n_cells}")
    print(f"rows written to {out_path}")
    return EXIT_OK


DEMO_SISO = """\
[plant]
n = 1
m = 1
p = 1
a = -1.0
b = 1.0

[filter]
c = 1.0
beta = 0.5

[excitation]
seed = 2
ts = 0.3
samples = 12
pe_order = 6

[annihilator]
route = uniform-fir

[output]
dir = {out}
"""

DEMO_MIMO = """\
[plant]
n = 2
m = 2
p = 2
A1 = 0.5479120971119267 -0.12224312049589536 ; 0.7171958398227649 0.3947360581187278
A2 = -0.8116453042247009 0.9512447032735118 ; 0.5222794039807059 0.5721286105539076
B1 = -0.7437727346489083 -0.09922812420886573 ; -0.25840395153483753 0.8535299776972036
B2 = 0.2877302401613291 0.64552322654166 ; -0.11317160234533774 -0.5455225564304462

[filter]
c = 2.484537672235512 1.1217169093086596
beta = 1.0579972789464778

[excitation]
seed = 5
ts = 0.25
samples = 79
pe_order = 20

[annihilator]
route = uniform-fir

[output]
dir = {out}
"""


def cmd_demo(args):
    out_dir = args.out or "demo-out"
    os.makedirs(out_dir, exist_ok=True)
    template = DEMO_SISO if args.which == "siso" else DEMO_MIMO
    cfg_path = os.path.join(out_dir, f"demo-{args.which}.cfg")
    with open(cfg_path, "w", encoding="utf-8") as fh:
        fh.write(template.format(out=out_dir))
    print(f"demo scenario written to {cfg_path}")
    ns = argparse.Namespace(config=cfg_path, out=out_dir)
    return cmd_run(ns)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="iostab",
        description="Stabilizing output-feedback synthesis from sampled "
                    "input-output data",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("verify", cmd_verify)):
        p = sub.add_parser(name)
        p.add_argument("config", help="scenario configuration file")
        p.add_argument("--out", default=None, help="output directory override")
        p.set_defaults(func=fn)
    p = sub.add_parser("sweep")
    p.add_argument("config", help="scenario template file")
    p.add_argument("--axis", required=True, help="<name>=<start:stop[:step]>")
    p.add_argument("--out", default=None, help="output directory override")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("demo")
    p.add_argument("which", nargs="?", default="siso", choices=("siso", "mimo"))
    p.add_argument("--out", default=None, help="output directory override")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
