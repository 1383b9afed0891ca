"""adatok command line.

Compute-style commands (cost, table5, bandwidth, merge) are thin clients of
the HTTP service: in-process by default, or against a remote instance with
--api-url. File and socket commands (fixtures, compare, send, serve, api) run
locally. Diagnostics and warnings go to stderr; stdout and produced files are
byte-deterministic for identical inputs and flags.

Exit codes: 0 success, 2 usage, 3 format, 4 transport, 5 empty result.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from .errors import AdatokError, exit_code_for

API_URL_HELP = "Base URL of a running adatok API; default runs the service in-process."


def _fail(error_name: str, message: str) -> None:
    click.echo(f"{error_name}: {message}", err=True)
    sys.exit(exit_code_for(error_name))


def _client(api_url: str | None) -> httpx.Client:
    if api_url:
        return httpx.Client(base_url=api_url, timeout=60.0)
    import warnings

    with warnings.catch_warnings():
        # some starlette releases warn on test-client import; keep stderr clean
        warnings.simplefilter("ignore", DeprecationWarning)
        warnings.simplefilter("ignore", UserWarning)
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _request(client: httpx.Client, method: str, url: str, **kwargs) -> httpx.Response:
    try:
        resp = client.request(method, url, **kwargs)
    except httpx.RequestError as exc:
        _fail("TransportError", f"API request failed: {exc}")
    if resp.status_code >= 400:
        try:
            envelope = resp.json()
            name = envelope.get("error", "AdatokError")
            message = envelope.get("message", resp.text)
        except ValueError:
            name, message = "AdatokError", resp.text
        _fail(name, message)
    return resp


def _write_manifest(output: Path, payload: dict) -> None:
    manifest_path = output.with_name(output.name + ".manifest.json")
    manifest_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")


@click.group()
def main() -> None:
    """Object-level adaptive visual-token compression toolkit."""


@main.command()
@click.option("--features", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--masks", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--scores", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-p", "--points", default=32, show_default=True, help="Prompt grid points per side.")
@click.option("--sigma", default=0.8, show_default=True, help="Confidence threshold.")
@click.option("--iou", default=0.9, show_default=True, help="IoU dedup threshold.")
@click.option(
    "--mode",
    default="nearest",
    show_default=True,
    type=click.Choice(["nearest", "bilinear"]),
    help="Feature upsampling mode.",
)
@click.option("--residual/--no-residual", default=False, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--dtype", default="f16", show_default=True, type=click.Choice(["f16", "f32"]))
@click.option("--api-url", default=None, envvar="ADATOK_API_URL", help=API_URL_HELP)
def merge(features, masks, scores, points, sigma, iou, mode, residual, out, dtype, api_url):
    """Run the full pipeline on one image's files and write a TOK frame."""
    with _client(api_url) as client:
        with open(features, "rb") as ff, open(masks, "rb") as mf, open(scores, "rb") as sf:
            resp = _request(
                client,
                "POST",
                "/merge",
                files={
                    "features": (Path(features).name, ff),
                    "masks": (Path(masks).name, mf),
                    "scores": (Path(scores).name, sf),
                },
                data={
                    "p": str(points),
                    "sigma": repr(sigma),
                    "iou": repr(iou),
                    "mode": mode,
                    "residual": "true" if residual else "false",
                    "dtype": dtype,
                },
            )
    out_path = Path(out)
    out_path.write_bytes(resp.content)
    k = int(resp.headers["X-Adatok-Tokens"])
    ratio = float(resp.headers["X-Adatok-Ratio"])
    payload_bytes = int(resp.headers["X-Adatok-Payload-Bytes"])
    _write_manifest(
        out_path,
        {
            "command": "merge",
            "inputs": {"features": str(features), "masks": str(masks), "scores": str(scores)},
            "flags": {
                "p": points,
                "sigma": sigma,
                "iou": iou,
                "mode": mode,
                "residual": residual,
                "dtype": dtype,
            },
            "out": str(out_path),
            "result": {"k": k, "ratio": ratio, "payload_bytes": payload_bytes},
        },
    )
    click.echo(f"k={k} r={ratio:.6f} bytes={payload_bytes}")


@main.command()
@click.option("--csv", "as_csv", is_flag=True, help="Emit machine-readable CSV.")
@click.option("--api-url", default=None, envvar="ADATOK_API_URL", help=API_URL_HELP)
def table5(as_csv, api_url):
    """Print the canonical 14-row bandwidth table."""
    with _client(api_url) as client:
        if as_csv:
            resp = _request(client, "GET", "/bandwidth/table", params={"fmt": "csv"})
            click.echo(resp.text, nl=False)
            return
        rows = _request(client, "GET", "/bandwidth/table").json()["rows"]
    images = [r for r in rows if r["kind"] == "image"]
    tokens = [r for r in rows if r["kind"] == "tokens"]
    click.echo(f"{'Resolution':<12}{'Bandwidth':<12}{'Unit':<8}{'Tokens':<8}{'Bandwidth':<12}Unit")
    for img, tok in zip(images, tokens):
        click.echo(
            f"{img['label']:<12}{img['display']:<12}{img['unit']:<8}"
            f"{tok['label']:<8}{tok['display']:<12}{tok['unit']}"
        )


@main.command()
@click.option("--image", default=None, help="Raw image dims as HxW, e.g. 640x480.")
@click.option("--tokens", default=None, type=int, help="Compressed token count.")
@click.option("--dim", default=1024, show_default=True, type=int)
@click.option("--dtype", default="f16", show_default=True, type=click.Choice(["f16", "f32"]))
@click.option("--csv", "as_csv", is_flag=True)
@click.option("--api-url", default=None, envvar="ADATOK_API_URL", help=API_URL_HELP)
def bandwidth(image, tokens, dim, dtype, as_csv, api_url):
    """Byte accounting for an arbitrary image and/or token stream."""
    params: dict = {"dim": dim, "dtype": dtype}
    if image is not None:
        try:
            h, w = (int(part) for part in image.lower().split("x"))
        except ValueError:
            raise click.UsageError(f"--image must be HxW, got {image!r}")
        params["image_h"], params["image_w"] = h, w
    if tokens is not None:
        params["tokens"] = tokens
    if image is None and tokens is None:
        raise click.UsageError("give --image and/or --tokens")
    with _client(api_url) as client:
        body = _request(client, "GET", "/bandwidth/query", params=params).json()
    if as_csv:
        from .service.app import rows_to_csv
        from .service.schemas import BandwidthRow

        click.echo(rows_to_csv([BandwidthRow(**r) for r in body["rows"]]), nl=False)
        if body["reduction_factor"] is not None:
            click.echo(f"reduction_factor,,,{body['reduction_factor']:.2f},x")
        return
    for row in body["rows"]:
        kind = "image" if row["kind"] == "image" else "tokens"
        click.echo(
            f"{kind} {row['label']}: {row['payload_bytes']} bytes "
            f"({row['display']} {row['unit']})"
        )
    if body["reduction_factor"] is not None:
        click.echo(f"reduction: {body['reduction_factor']:.2f}x")


@main.command()
@click.option("-L", "--layers", required=True, type=int, help="Decoder layer count L.")
@click.option("-k", "--at", default=1, show_default=True, type=int, help="Compression layer k.")
@click.option("-r", "--ratio", default=None, type=float, help="Compression ratio in (0, 1].")
@click.option("--tokens", default=None, type=int, help="Token count to derive the ratio from.")
@click.option("--grid", default=None, help="Patch grid as HxW (with --tokens), e.g. 24x24.")
@click.option("--flops-per-unit", default=None, type=float, help="Absolute-estimate multiplier.")
@click.option("--csv", "as_csv", is_flag=True)
@click.option("--api-url", default=None, envvar="ADATOK_API_URL", help=API_URL_HELP)
def cost(layers, at, ratio, tokens, grid, flops_per_unit, as_csv, api_url):
    """Evaluate the quadratic prefill cost model and the compression benefit."""
    payload: dict = {"layers": layers, "compress_at": at}
    if ratio is not None:
        payload["ratio"] = ratio
    if tokens is not None:
        payload["tokens"] = tokens
    if grid is not None:
        try:
            gh, gw = (int(part) for part in grid.lower().split("x"))
        except ValueError:
            raise click.UsageError(f"--grid must be HxW, got {grid!r}")
        payload["grid_h"], payload["grid_w"] = gh, gw
    if flops_per_unit is not None:
        payload["flops_per_unit"] = flops_per_unit
    with _client(api_url) as client:
        body = _request(client, "POST", "/cost", json=payload).json()
    if as_csv:
        click.echo("cost_uncompressed,cost_compressed,benefit,ratio,units")
        click.echo(
            f"{body['cost_uncompressed']!r},{body['cost_compressed']!r},"
            f"{body['benefit']!r},{body['ratio']!r},{body['units']}"
        )
        return
    click.echo(f"ratio             {body['ratio']:.6f}")
    click.echo(f"cost uncompressed {body['cost_uncompressed']:.6f} {body['units']}")
    click.echo(f"cost compressed   {body['cost_compressed']:.6f} {body['units']}")
    click.echo(f"benefit           {body['benefit']:.6f} {body['units']}")


@main.command()
@click.option("--out", required=True, type=click.Path(file_okay=False))
def fixtures(out):
    """Generate the deterministic synthetic fixture set."""
    from .fixtures import write_fixture_set

    try:
        manifest = write_fixture_set(Path(out))
    except AdatokError as exc:
        _fail(type(exc).__name__, str(exc))
    for entry in manifest["fixtures"]:
        click.echo(
            f"wrote {entry['name']} objects={entry['objects']} "
            f"grid={entry['grid'][0]}x{entry['grid'][1]} dim={entry['dim']}"
        )


@main.command()
@click.option("--fixtures", "fixtures_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--budgets", default="4,8,16", show_default=True, help="Comma-separated budgets.")
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="CSV path (default stdout).")
@click.option("-p", "--points", default=32, show_default=True)
@click.option("--sigma", default=0.8, show_default=True)
@click.option("--iou", default=0.9, show_default=True)
def compare(fixtures_dir, budgets, out, points, sigma, iou):
    """Token-budget vs retention-error comparison across strategies."""
    from .baselines import compare_rows
    from .fixtures import load_fixture
    from .mask_pipeline import GridPromptConfig

    try:
        budget_list = [int(b) for b in budgets.split(",") if b.strip()]
    except ValueError:
        raise click.UsageError(f"--budgets must be comma-separated integers, got {budgets!r}")
    if not budget_list:
        raise click.UsageError("--budgets is empty")
    root = Path(fixtures_dir)
    names = sorted(p.name for p in root.iterdir() if (p / "features.atsr").exists())
    if not names:
        _fail("InvalidArgument", f"no fixtures under {root}")
    lines = ["fixture,strategy,tokens,retention_error,ratio"]
    try:
        cfg = GridPromptConfig(points_per_side=points, sigma=sigma, iou_dedup_threshold=iou)
        for name in names:
            fg, candidates = load_fixture(root / name)
            rows = compare_rows(
                fg,
                candidates,
                cfg,
                budget_list,
                warn=lambda msg: click.echo(f"warning: {name}: {msg}", err=True),
            )
            for row in rows:
                lines.append(
                    f"{name},{row.strategy},{row.tokens},{row.retention_error!r},{row.ratio!r}"
                )
    except AdatokError as exc:
        _fail(type(exc).__name__, str(exc))
    text = "\n".join(lines) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        out_path = Path(out)
        out_path.write_text(text, "utf-8")
        _write_manifest(
            out_path,
            {
                "command": "compare",
                "fixtures": str(root),
                "flags": {"budgets": budget_list, "p": points, "sigma": sigma, "iou": iou},
                "out": str(out_path),
            },
        )
        click.echo(f"wrote {out_path} rows={len(lines) - 1}")


@main.command()
@click.argument("frame_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", required=True, type=int)
@click.option("--throttle-kbps", default=None, type=float, help="Pace the send at N KB/s.")
@click.option("--timeout", default=10.0, show_default=True, help="Ack timeout in seconds.")
def send(frame_file, host, port, throttle_kbps, timeout):
    """Transmit a TOK frame to a running server and wait for the ack."""
    import hashlib

    from .token_wire import send as wire_send

    frame = Path(frame_file).read_bytes()
    try:
        report = wire_send(host, port, frame, throttle_kbps=throttle_kbps, ack_timeout=timeout)
    except AdatokError as exc:
        _fail(type(exc).__name__, str(exc))
    digest = hashlib.sha256(frame).hexdigest()
    click.echo(
        f"elapsed={report.elapsed_s:.3f}s throughput={report.throughput_bps / 1024:.1f}KB/s",
        err=True,
    )
    click.echo(f"sent={report.bytes_sent} ack=ok sha256={digest}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", required=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Frame sink directory.")
@click.option("--persistent", is_flag=True, help="Accept multiple frames per connection.")
def serve(host, port, out, persistent):
    """Accept framed token uploads and store them content-addressed under --out."""
    from .token_wire import TokenServer

    try:
        server = TokenServer(host, port, Path(out), persistent=persistent)
    except AdatokError as exc:
        _fail(type(exc).__name__, str(exc))
    click.echo(f"listening on {host}:{server.port}, sink {out}", err=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--sink", default=None, type=click.Path(file_okay=False), help="Frame ingest sink.")
def api(host, port, sink):
    """Run the HTTP service standalone."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(sink_dir=sink), host=host, port=port)


if __name__ == "__main__":
    main()
