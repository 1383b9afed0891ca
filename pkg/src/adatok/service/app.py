"""HTTP facade over the toolkit: cost model, bandwidth tables, merging, frame ingest.

The CLI is a thin client of this app (in-process by default, remote with
--api-url); a deployment can also run it standalone via `adatok api` for
multi-client use. Frame ingest mirrors the TCP server's content-addressed sink.
"""

from __future__ import annotations

import hashlib
import io
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from fastapi import FastAPI, File, Form, Query, Request, Response, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import cost_model, object_merge, token_wire
from ..errors import AdatokError, FormatError, InvalidArgument, NoMasksSurvived
from ..mask_pipeline import GridPromptConfig, mask_set_from_tensor, run_pipeline
from ..tensor_io import parse_sidecar, parse_tensor, validate_sidecar
from .schemas import (
    BandwidthQueryResponse,
    BandwidthRow,
    BandwidthTableResponse,
    CostRequest,
    CostResponse,
    FrameIngestResponse,
    HealthResponse,
)


def _version() -> str:
    try:
        return version("adatok")
    except PackageNotFoundError:
        return "0.0.0+local"


def _status_for(exc: AdatokError) -> int:
    if isinstance(exc, NoMasksSurvived):
        return 422
    if isinstance(exc, InvalidArgument):
        return 422
    if isinstance(exc, FormatError):
        return 400
    return 500


def _table_rows() -> list[BandwidthRow]:
    rows = []
    for label, entry in cost_model.bandwidth_table():
        rows.append(
            BandwidthRow(
                kind="image" if label.endswith("^2") else "tokens",
                label=label,
                payload_bytes=entry.payload_bytes,
                display_value=entry.display_value,
                unit=entry.display_unit,
                display=entry.display,
            )
        )
    return rows


def rows_to_csv(rows: list[BandwidthRow]) -> str:
    out = io.StringIO()
    out.write("kind,label,payload_bytes,bandwidth,unit\n")
    for r in rows:
        out.write(f"{r.kind},{r.label},{r.payload_bytes},{r.display},{r.unit}\n")
    return out.getvalue()


def create_app(sink_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="adatok", version=_version())
    sink = Path(sink_dir) if sink_dir is not None else None

    @app.exception_handler(AdatokError)
    async def _adatok_error(_request: Request, exc: AdatokError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(version=_version())

    @app.post("/cost", response_model=CostResponse)
    def cost(req: CostRequest) -> CostResponse:
        cfg = cost_model.DecoderConfig(
            num_layers=req.layers,
            compress_at_layer=req.compress_at,
            pre_tokens=(req.grid_h or 24) * (req.grid_w or 24),
        )
        if req.ratio is not None and req.tokens is not None:
            raise InvalidArgument("give either ratio or tokens, not both")
        if req.ratio is not None:
            ratio = req.ratio
        elif req.tokens is not None:
            if req.grid_h is None or req.grid_w is None:
                raise InvalidArgument("tokens needs grid_h and grid_w to derive the ratio")
            ratio = req.tokens / (req.grid_h * req.grid_w)
        else:
            raise InvalidArgument("give ratio, or tokens plus grid dims")
        report = cost_model.compute_cost(cfg, ratio, flops_per_unit=req.flops_per_unit)
        return CostResponse(
            cost_uncompressed=report.cost_uncompressed,
            cost_compressed=report.cost_compressed,
            benefit=report.benefit,
            ratio=report.ratio,
            units="|X1|^2" if req.flops_per_unit is None else "flops(estimate)",
        )

    @app.get("/bandwidth/table")
    def bandwidth_table(fmt: str = Query(default="json")):
        rows = _table_rows()
        if fmt == "csv":
            return PlainTextResponse(rows_to_csv(rows), media_type="text/csv")
        if fmt != "json":
            raise InvalidArgument(f"fmt must be json or csv, got {fmt!r}")
        return BandwidthTableResponse(rows=rows)

    @app.get("/bandwidth/query", response_model=BandwidthQueryResponse)
    def bandwidth_query(
        image_h: int | None = None,
        image_w: int | None = None,
        tokens: int | None = None,
        dim: int = 1024,
        dtype: str = "f16",
    ) -> BandwidthQueryResponse:
        img = None
        tok = None
        rows: list[BandwidthRow] = []
        if image_h is not None or image_w is not None:
            if image_h is None or image_w is None:
                raise InvalidArgument("image query needs both image_h and image_w")
            img = cost_model.image_bytes(image_h, image_w)
            entry = cost_model.bytes_to_entry(img)
            rows.append(
                BandwidthRow(
                    kind="image",
                    label=f"{image_h}x{image_w}",
                    payload_bytes=entry.payload_bytes,
                    display_value=entry.display_value,
                    unit=entry.display_unit,
                    display=entry.display,
                )
            )
        if tokens is not None:
            tok = cost_model.token_bytes(tokens, dim, dtype)
            entry = cost_model.bytes_to_entry(tok)
            rows.append(
                BandwidthRow(
                    kind="tokens",
                    label=str(tokens),
                    payload_bytes=entry.payload_bytes,
                    display_value=entry.display_value,
                    unit=entry.display_unit,
                    display=entry.display,
                )
            )
        if img is None and tok is None:
            raise InvalidArgument("nothing to compute: give image dims and/or a token count")
        factor = img / tok if img is not None and tok is not None else None
        return BandwidthQueryResponse(
            image_bytes=img, token_bytes=tok, reduction_factor=factor, rows=rows
        )

    @app.post("/merge")
    async def merge_endpoint(
        features: UploadFile = File(...),
        masks: UploadFile = File(...),
        scores: UploadFile = File(...),
        p: int = Form(default=32),
        sigma: float = Form(default=0.8),
        iou: float = Form(default=0.9),
        mode: str = Form(default="nearest"),
        residual: bool = Form(default=False),
        dtype: str = Form(default="f16"),
    ) -> Response:
        feat_tensor = parse_tensor(await features.read(), name=features.filename or "features")
        if feat_tensor.values.ndim != 3:
            raise FormatError("feature tensor must be rank 3 (grid_h, grid_w, dim)")
        mask_tensor = parse_tensor(await masks.read(), name=masks.filename or "masks")
        score_map = parse_sidecar(
            (await scores.read()).decode("utf-8"), name=scores.filename or "scores"
        )
        validate_sidecar(score_map, mask_tensor.dims[0])
        fg = object_merge.FeatureGrid(values=feat_tensor.working())
        candidates = mask_set_from_tensor(mask_tensor, score_map)
        cfg = GridPromptConfig(points_per_side=p, sigma=sigma, iou_dedup_threshold=iou)
        surviving = run_pipeline(candidates, cfg)
        if not len(surviving):
            raise NoMasksSurvived(
                f"no masks survived (p={p}, sigma={sigma}, iou={iou}); nothing to merge"
            )
        if mode == "nearest":
            cts = object_merge.merge_fast(fg, surviving, residual_token=residual)
        else:
            cts = object_merge.merge(fg, surviving, mode=mode, residual_token=residual)
        frame = token_wire.pack(cts, dtype=dtype)
        payload_bytes = cost_model.token_bytes(cts.count, cts.dim, dtype) if cts.count else 0
        headers = {
            "X-Adatok-Tokens": str(cts.count),
            "X-Adatok-Ratio": repr(object_merge.compression_ratio(cts)),
            "X-Adatok-Payload-Bytes": str(payload_bytes),
            "X-Adatok-Residual": "1" if cts.residual_included else "0",
        }
        return Response(content=frame, media_type="application/octet-stream", headers=headers)

    @app.post("/frames", response_model=FrameIngestResponse)
    async def ingest_frame(request: Request) -> FrameIngestResponse:
        frame = await request.body()
        if len(frame) > token_wire.MAX_FRAME_BYTES:
            raise FormatError(f"frame is {len(frame)} bytes, limit {token_wire.MAX_FRAME_BYTES}")
        cts = token_wire.unpack(frame)
        digest = hashlib.sha256(frame).hexdigest()
        stored_as = None
        if sink is not None:
            sink.mkdir(parents=True, exist_ok=True)
            target = sink / f"{digest}.tok"
            if not target.exists():
                tmp = sink / f".{digest}.part"
                tmp.write_bytes(frame)
                tmp.replace(target)
            stored_as = str(target)
        return FrameIngestResponse(
            sha256=digest,
            stored_as=stored_as,
            tokens=cts.count,
            dim=cts.dim,
            frame_bytes=len(frame),
        )

    return app
