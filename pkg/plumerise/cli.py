"""
Command-line interface.

Exit codes: 0 when everything succeeded, 2 when some items failed, 1 on
configuration errors.
"""
import logging
from pathlib import Path

import click
import yaml

from plumerise.briggs import AmbientConditions, buoyancy_flux, momentum_flux, rise_at_distance
from plumerise.config import APP_CONFIG, BATCH_CONFIG, camera_to_sections, load_site_config
from plumerise.errors import ConfigError, NonMonotonicTimestamps, PlumeRiseError, WindParseError
from plumerise.pipeline import evaluate, find_masks, measure_batch, new_run_id, write_report
from plumerise.pnm import encode_pnm
from plumerise.records import RecordLog, load_wind_file
from plumerise.rpn_loss import check_fixtures, load_loss_fixtures
from plumerise.synth_oracle import generate, load_scenario
from plumerise.utils import compact_timestamp, format_timestamp, save_json, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _fail_config(ctx: click.Context, error: Exception):
    click.secho(f"Configuration error: {error}", fg="red", bold=True, err=True)
    ctx.exit(EXIT_CONFIG)


def _fmt(value) -> str:
    return "undefined" if value is None else f"{value:.4f}"


@click.group()
@click.option("--log-level", default=None, help="Override PLUMERISE_LOG_LEVEL.")
@click.version_option(APP_CONFIG["version"], prog_name=APP_CONFIG["name"])
def cli(log_level):
    """Plume rise measurement from segmentation masks."""
    setup_logging(log_level)


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), required=True, help="Camera/site YAML file.")
@click.option("--wind", "wind_path", type=click.Path(dir_okay=False), required=True, help="Wind CSV (timestamp,wd_deg).")
@click.option("--masks", "mask_dir", type=click.Path(file_okay=False), required=True, help="Directory of netpbm masks.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="JSON-lines record log to append to.")
@click.option("--workers", type=int, default=BATCH_CONFIG["workers"], show_default=True, help="Worker processes.")
@click.option("--profile-dir", type=click.Path(file_okay=False), default=None, help="Write centerline CSVs here.")
@click.option("--no-progress", is_flag=True, help="Hide the progress bar.")
@click.pass_context
def measure(ctx, config_path, wind_path, mask_dir, out_path, workers, profile_dir, no_progress):
    """Measure plume rise for every mask in a directory."""
    try:
        site = load_site_config(config_path)
        wind = load_wind_file(wind_path)
    except (ConfigError, WindParseError, NonMonotonicTimestamps, OSError) as e:
        _fail_config(ctx, e)
    if not Path(mask_dir).is_dir():
        _fail_config(ctx, f"mask directory {mask_dir} does not exist")
    if profile_dir:
        Path(profile_dir).mkdir(parents=True, exist_ok=True)

    masks = find_masks(mask_dir)
    if not masks:
        click.echo(f"No masks found in {mask_dir}")
        ctx.exit(EXIT_OK)

    run_id = new_run_id()
    records = measure_batch(
        masks, site, wind, RecordLog(out_path),
        workers=workers, run_id=run_id, profile_dir=profile_dir, progress=not no_progress,
    )
    failed = [r for r in records if r.status != "ok"]
    click.echo(f"Run {run_id}: {len(records) - len(failed)} of {len(records)} masks measured, records in {out_path}")
    for record in failed:
        click.secho(f"  {record.image_id}: {record.error} ({record.message})", fg="yellow")
    ctx.exit(EXIT_PARTIAL if failed else EXIT_OK)


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), required=True, help="Site YAML with a stack roster.")
@click.option("--stack", "stack_id", required=True, help="Stack id from the roster.")
@click.option("--wind-speed", type=float, required=True, help="Mean wind speed (m/s).")
@click.option("--x", "distances", type=float, multiple=True, required=True, help="Downwind distance (m); repeatable.")
@click.option("--air-temp", type=float, default=None, help="Ambient temperature (K); overrides the site file.")
@click.option("--squared-velocity", is_flag=True, help="Use the squared exit velocity in the buoyancy flux.")
@click.pass_context
def briggs(ctx, config_path, stack_id, wind_speed, distances, air_temp, squared_velocity):
    """Briggs plume rise for a rostered stack."""
    try:
        site = load_site_config(config_path)
        if stack_id not in site.stacks:
            raise ConfigError(f"stack '{stack_id}' is not in the roster")
        if site.ambient is None and air_temp is None:
            raise ConfigError("ambient air temperature is needed (site 'ambient' section or --air-temp)")
        update = {"mean_wind_mps": wind_speed}
        if air_temp is not None:
            update["air_temp_K"] = air_temp
        base = site.ambient.model_dump() if site.ambient is not None else {}
        amb = AmbientConditions(**{**base, **update})
    except (ConfigError, ValueError) as e:
        _fail_config(ctx, e)

    stack = site.stacks[stack_id]
    F_m = momentum_flux(stack, amb)
    F_b = buoyancy_flux(stack, amb, squared_velocity=squared_velocity)
    click.echo(f"Stack {stack.id}: F_m = {F_m:.4f} m^4/s^2, F_b = {F_b:.4f}")
    try:
        for x in distances:
            rise = rise_at_distance(F_m, F_b, wind_speed, x, amb.entrainment)
            click.echo(f"  x = {x:.1f} m: delta_z = {rise:.2f} m")
    except (PlumeRiseError, ValueError) as e:
        click.secho(f"Error: {e}", fg="red", bold=True, err=True)
        ctx.exit(EXIT_PARTIAL)


@cli.command("eval")
@click.option("--pred", "pred_dir", type=click.Path(file_okay=False), required=True, help="Predicted masks.")
@click.option("--gt", "gt_dir", type=click.Path(file_okay=False), required=True, help="Ground-truth masks.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="CSV report path.")
@click.option("--threshold", type=click.IntRange(1, 255), default=None, help="Graymap plume threshold.")
@click.pass_context
def eval_command(ctx, pred_dir, gt_dir, out_path, threshold):
    """Pixel metrics of predicted masks against ground truth."""
    for directory in (pred_dir, gt_dir):
        if not Path(directory).is_dir():
            _fail_config(ctx, f"directory {directory} does not exist")

    report = evaluate(pred_dir, gt_dir, threshold)
    if out_path and not write_report(report, out_path):
        ctx.exit(EXIT_CONFIG)

    summary = report.summary
    click.echo(f"Compared {len(report.per_image)} mask pairs")
    for mode in ("macro", "micro"):
        s = summary[mode]
        click.echo(
            f"  {mode}: accuracy={_fmt(s.accuracy)} recall={_fmt(s.recall)} "
            f"precision={_fmt(s.precision)} f1={_fmt(s.f1)}"
        )
    for name, error in report.failures:
        click.secho(f"  {name}: {getattr(error, 'cause', 'error')} ({error})", fg="yellow")
    ctx.exit(EXIT_PARTIAL if report.failures else EXIT_OK)


@cli.command()
@click.option("--scenario", "scenario_path", type=click.Path(dir_okay=False), required=True, help="Scenario YAML.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True, help="Output directory.")
@click.pass_context
def synth(ctx, scenario_path, out_dir):
    """Render a synthetic mask with its truth record, wind file and site file."""
    try:
        scn = load_scenario(scenario_path)
    except ConfigError as e:
        _fail_config(ctx, e)

    try:
        mask, truth = generate(scn)
    except PlumeRiseError as e:
        click.secho(f"Error: {e.cause}: {e}", fg="red", bold=True, err=True)
        ctx.exit(EXIT_PARTIAL)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{scn.image_id}_{compact_timestamp(scn.timestamp)}"
    with open(out / f"{stem}.pgm", "wb") as f:
        f.write(encode_pnm(mask, "P5"))
    with open(out / f"{stem}.wind.csv", "w", encoding="utf-8") as f:
        f.write(f"timestamp,wd_deg\n{format_timestamp(scn.timestamp)},{scn.phi_deg % 360.0}\n")
    site = {**camera_to_sections(scn.cam), "analysis": scn.analysis.model_dump()}
    with open(out / f"{stem}.site.yaml", "w", encoding="utf-8") as f:
        yaml.safe_dump(site, f, sort_keys=False)
    if not save_json(truth.model_dump(mode="json"), out / f"{stem}.truth.json"):
        ctx.exit(EXIT_CONFIG)

    click.echo(f"Wrote {stem}.pgm; truth delta_z = {truth.delta_z_m:.2f} m")


@cli.command("loss-check")
@click.option("--fixtures", "fixtures_path", type=click.Path(dir_okay=False), required=True, help="Fixture CSV.")
@click.pass_context
def loss_check(ctx, fixtures_path):
    """Check the regression loss against a fixture table."""
    try:
        fixtures = load_loss_fixtures(fixtures_path)
    except ConfigError as e:
        _fail_config(ctx, e)

    results = check_fixtures(fixtures)
    for result in results:
        mark = click.style("ok", fg="green") if result.passed else click.style("FAIL", fg="red", bold=True)
        click.echo(f"{mark} {result.fixture.case}: {result.actual:.12g} (expected {result.fixture.expected:.12g})")
    failed = sum(1 for r in results if not r.passed)
    click.echo(f"{len(results) - failed} of {len(results)} fixtures passed")
    ctx.exit(EXIT_PARTIAL if failed else EXIT_OK)
