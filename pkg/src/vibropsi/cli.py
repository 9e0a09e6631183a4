"""Operator command line: simulate, run, analyze, serve.

Exit codes: 0 success, 1 validation problem, 2 runtime failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import analysis, bape, observer, report
from .apparatus import FaultProfile, SimulatedApparatus, Task
from .protocol import (
    Phase,
    Session,
    SessionConfig,
    load_record,
    record_path,
)
from .psymodel import CurveSamples


class ValidationError(click.ClickException):
    exit_code = 1


def _load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file is not valid JSON: {exc}")


def _session_config(cfg: dict, seed=None, tsid=None, session_id=None) -> SessionConfig:
    sess = dict(cfg.get("session", {}))
    if seed is not None:
        sess["seed"] = seed
    if tsid is not None:
        sess["tsid"] = tsid
    if session_id is not None:
        sess["session_id"] = session_id
    try:
        return SessionConfig(
            task=Task(sess["task"]),
            tsid=sess["tsid"],
            trials_per_block=sess.get("trials_per_block", 50),
            seed=sess.get("seed", 0),
            first_orientation=sess.get("first_orientation", "RANDOM"),
            mean_duty=sess.get("mean_duty", 80.0),
            duty_jitter_sd=sess.get("duty_jitter_sd", 3.0),
            inter_stimulus_gap_ms=sess.get("inter_stimulus_gap_ms", 500.0),
            reveal_feedback=sess.get("reveal_feedback", False),
            session_id=sess.get("session_id"),
        )
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"bad session config: {exc}")


def _apparatus_for(cfg: dict, seed: int):
    app = cfg.get("apparatus", {})
    backend = app.get("backend", "simulator")
    fault = None
    if backend in ("no_contact", "force_drift", "separation_stick"):
        fault = FaultProfile(kind=backend)
    elif backend != "simulator":
        raise ValidationError(f"unknown apparatus backend {backend!r}")
    return SimulatedApparatus(seed=seed + 1, fault=fault)


@click.group()
def cli():
    """Adaptive vibrotactile spatial-acuity engine."""


@cli.command("simulate")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--count", default=1, show_default=True, help="number of sessions")
@click.option("--seed", default=0, show_default=True, help="base seed; run i uses seed+i")
@click.option("--out", "out_dir", default="./vibropsi-out", show_default=True)
@click.option("--data-dir", default=None, help="record directory (default: <out>/records)")
@click.option("--plots/--no-plots", default=True, show_default=True)
def cmd_simulate(config_path, count, seed, out_dir, data_dir, plots):
    """Run seeded simulated sessions and summarize them."""
    if count < 1:
        raise ValidationError("--count must be >= 1")
    cfg = _load_config(config_path)
    if "observer" not in cfg:
        raise ValidationError("config needs an 'observer' section for simulation")
    try:
        model = observer.from_config(cfg["observer"])
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"bad observer config: {exc}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records_dir = Path(data_dir) if data_dir else out / "records"

    rows = []
    first_record = None
    traces = []
    for i in range(count):
        run_seed = seed + i
        base_tsid = cfg.get("session", {}).get("tsid", "SIM")
        tsid = f"{base_tsid}-{i:03d}" if count > 1 else base_tsid
        sc = _session_config(cfg, seed=run_seed, tsid=tsid)
        session = Session(sc, _apparatus_for(cfg, run_seed))
        obs_rng = np.random.default_rng(run_seed + 10_000)

        def responder(separation, target, options):
            return observer.respond(model, separation, target, options, obs_rng)

        session.run_to_completion(responder)
        rec = session.finalize(records_dir)
        if first_record is None:
            first_record = rec
        traces.append(session.entropy_trace)

        exp = rec["postmean"]["params_expectation"]
        seps = [t.separation for t in session.history]
        lo, hi = session.candidates.separations[0], session.candidates.separations[-1]
        late = seps[20:]
        extreme_frac = (sum(1 for s in late if s in (lo, hi)) / len(late)
                        if late else 0.0)
        rows.append({
            "run": i,
            "tsid": tsid,
            "session_id": session.session_id,
            "seed": run_seed,
            "E_a_mm": exp["a"],
            "E_b": exp["b"],
            "E_gamma": exp["gamma"],
            "final_entropy": session.entropy_trace[-1],
            "extreme_query_fraction": extreme_frac,
            "phase": rec["phase"],
        })

    import csv as _csv

    summary_path = out / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)

    med_a = float(np.median([r["E_a_mm"] for r in rows]))
    med_extreme = float(np.median([r["extreme_query_fraction"] for r in rows]))
    excluded = sum(1 for r in rows if r["phase"] == "EXCLUDED")
    click.echo(f"runs: {count}  records: {records_dir}")
    click.echo(f"median E[a] = {med_a:.2f} mm   "
               f"median E[b] = {float(np.median([r['E_b'] for r in rows])):.2f}   "
               f"median E[gamma] = {float(np.median([r['E_gamma'] for r in rows])):.3f}")
    click.echo(f"median final entropy = "
               f"{float(np.median([r['final_entropy'] for r in rows])):.3f} nats")
    click.echo(f"median extreme-separation query fraction (trials 21+) = "
               f"{med_extreme:.2f}")
    if med_extreme > 0.5:
        click.echo("warning: queries concentrate at the extreme separations "
                   "(near-chance observer pattern)")
    if excluded:
        click.echo(f"bias guard excluded {excluded} run(s)")
    click.echo(f"summary: {summary_path}")

    if plots and first_record is not None:
        report.render_session_scatter(first_record, out / "first_run_scatter.png")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(7, 4))
        for trace in traces:
            ax.plot(range(len(trace)), trace, color="tab:blue", alpha=0.25)
        ax.set_xlabel("trial")
        ax.set_ylabel("entropy [nats]")
        fig.tight_layout()
        fig.savefig(out / "entropy_traces.png", dpi=150)
        plt.close(fig)
        click.echo(f"figures: {out / 'first_run_scatter.png'}, "
                   f"{out / 'entropy_traces.png'}")


PRACTICE_TRIALS = 10


@cli.command("run")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", default=None, type=int)
@click.option("--data-dir", default="./vibropsi-data", show_default=True)
@click.option("--practice/--no-practice", default=True, show_default=True)
def cmd_run(config_path, seed, data_dir, practice):
    """Interactive terminal session (keypress responses)."""
    cfg = _load_config(config_path)
    sc = _session_config(cfg, seed=seed)
    session = Session(sc, _apparatus_for(cfg, sc.seed))
    options = session.options
    keymap = {"1": options[0], "2": options[1]}
    click.echo(f"task {sc.task.value}, {sc.total_trials} trials, "
               f"respond 1 = {options[0]}, 2 = {options[1]}")

    def ask(prompt):
        while True:
            ch = click.prompt(prompt, type=str).strip()
            if ch in keymap:
                return keymap[ch]
            click.echo("please answer 1 or 2")

    try:
        if practice:
            # familiarization at the three largest separations, cycled;
            # never touches the posterior
            top3 = list(session.candidates.separations[-3:][::-1])
            practice_rng = np.random.default_rng(sc.seed + 20_000)
            click.echo(f"practice block: {PRACTICE_TRIALS} trials")
            for i in range(PRACTICE_TRIALS):
                sep = top3[i % 3]
                target = options[int(practice_rng.integers(2))]
                click.echo(f"[practice {i + 1}] separation {sep:.1f} mm")
                resp = ask("response")
                click.echo("  " + ("correct" if resp == target else "incorrect"))
            click.echo("practice done; scoring starts now")

        while not session.done:
            if session.phase is Phase.REORIENTING:
                click.echo("** rotate the rig 90 degrees, then press enter **")
                click.prompt("", default="", show_default=False)
                session.advance_block()
            stim = session.begin_trial()
            click.echo(f"[trial {len(session.history) + 1}/{sc.total_trials}] "
                       f"separation {stim['separation_mm']:.1f} mm "
                       f"({stim['orientation'].lower()})")
            resp = ask("response")
            record = session.submit_response(resp)
            if sc.reveal_feedback:
                click.echo("  " + ("correct" if record.correct else "incorrect"))
        rec = session.finalize(data_dir)
        click.echo(f"session {session.session_id}: {rec['phase']}")
        click.echo(f"record: {record_path(data_dir, sc.tsid, session.session_id)}")
    except (KeyboardInterrupt, click.Abort):
        if session.history:
            session.abort(data_dir, reason="interrupted")
            click.echo(f"\naborted; partial record saved under {sc.tsid}")
        else:
            click.echo("\naborted before any trial; nothing saved")
        sys.exit(2)


@cli.command("analyze")
@click.option("--records", "records_glob", required=True,
              help="glob of session record JSON files")
@click.option("--reference", "reference_path", default=None, type=click.Path(),
              help="two-column reference curve CSV (default: bundled fixture)")
@click.option("--out", "out_dir", default="./vibropsi-analysis", show_default=True)
@click.option("--plots/--no-plots", default=True, show_default=True)
def cmd_analyze(records_glob, reference_path, out_dir, plots):
    """Cohort mean curve, threshold report and reference comparison."""
    import glob as _glob

    paths = sorted(_glob.glob(records_glob))
    if not paths:
        raise ValidationError(f"no records match {records_glob!r}")
    curves = []
    skipped = 0
    for p in paths:
        rec = load_record(p)
        if rec.get("phase") != "COMPLETE":
            skipped += 1
            click.echo(f"warning: skipping {Path(p).name} (phase {rec.get('phase')})")
            continue
        cs = rec["postmean"]["curve_samples"]
        curves.append(CurveSamples(np.asarray(cs["x_mm"]), np.asarray(cs["y"])))
    if len(curves) < 2:
        raise ValidationError(
            f"need at least 2 COMPLETE records, found {len(curves)}"
        )
    click.echo(f"analyzing {len(curves)} records ({skipped} skipped)")

    if reference_path:
        ref = analysis.load_reference_curve(reference_path,
                                            label=Path(reference_path).stem)
    else:
        ref = analysis.builtin_reference_curve()

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    mean = analysis.cohort_mean(curves)
    thresholds = analysis.extract_thresholds(mean)
    x_test = bape.default_candidates()
    comparison = analysis.compare_to_reference(curves, ref, x_test)

    analysis.export_plot_data(mean, out / "mean_curve.csv")
    analysis.export_plot_data(thresholds, out / "thresholds.csv")
    analysis.export_plot_data(comparison, out / "comparison.csv")

    for lv, sep in zip(thresholds.levels, thresholds.separations):
        click.echo(f"level {lv:.2f}: "
                   + (f"{sep:.1f} mm" if sep is not analysis.NOT_REACHED
                      else "NOT_REACHED"))
    n_sig = sum(comparison.significant)
    click.echo(f"significant separations after Bonferroni: {n_sig}/{len(x_test)}")

    if plots:
        report.render_mean_curve(mean, out / "mean_curve.png", individuals=curves)
        ref_thresholds = analysis.extract_thresholds(ref.as_samples())
        report.render_thresholds(thresholds, out / "thresholds.png",
                                 reference_report=ref_thresholds)
        report.render_comparison(comparison, mean, ref, out / "comparison.png")
        click.echo(f"figures written to {out}")
    click.echo(f"exports written to {out}")


@cli.command("serve")
@click.option("--config", "config_path", default=None, type=click.Path())
def cmd_serve(config_path):
    """Run the HTTP session service."""
    from .service import ServiceSettings, run

    settings = (ServiceSettings.from_file(config_path)
                if config_path else ServiceSettings())
    run(settings)


def main():
    try:
        cli.main(standalone_mode=False)
    except ValidationError as exc:
        click.echo(f"error: {exc.message}", err=True)
        sys.exit(1)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(1)
    except click.Abort:
        sys.exit(2)
    except click.ClickException as exc:
        click.echo(f"error: {exc.message}", err=True)
        sys.exit(2)
    except Exception as exc:  # runtime failure
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
