"""Thin HTTP service wrapping the kernel.

The node serializes commands, persists the accepted-command log, and serves
queries; it never alters kernel logic. Mutations funnel through a single
lock (the total-order admission gate the determinism contract requires);
queries are read-only. Wide distances are returned as decimal strings, not
JSON numbers, so clients never round them through a float.

Restore replaces the in-memory state atomically after full validation; it
does not rewrite an existing command log, so a restored node's log is no
longer a full history (fresh nodes replaying their own log always match).
"""

from __future__ import annotations

import argparse
import base64
import binascii
import threading
from decimal import Decimal

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import replaylog, snapshot
from .errors import (
    DimensionMismatch,
    DuplicateId,
    NonFiniteInput,
    SelfLink,
    UnknownId,
    ValoriError,
)
from .fixedpoint import FixedVector, from_float_array
from .kernel import (
    Delete,
    HnswParams,
    Insert,
    KernelConfig,
    Link,
    Precision,
    apply,
    new_state,
    query,
    state_hash,
)


class InsertRequest(BaseModel):
    id: int = Field(ge=0, le=(1 << 64) - 1)
    vector: list[float]
    metadata: str | None = None  # base64


class DeleteRequest(BaseModel):
    id: int = Field(ge=0, le=(1 << 64) - 1)


class LinkRequest(BaseModel):
    a: int = Field(ge=0, le=(1 << 64) - 1)
    b: int = Field(ge=0, le=(1 << 64) - 1)


class QueryRequest(BaseModel):
    vector: list[float]
    k: int = Field(ge=1, default=10)
    ef: int | None = None


def _error_response(exc: Exception) -> JSONResponse:
    status = 400
    if isinstance(exc, DuplicateId):
        status = 409
    elif isinstance(exc, UnknownId):
        status = 404
    elif isinstance(exc, NonFiniteInput):
        status = 422
    elif isinstance(exc, (DimensionMismatch, SelfLink, ValueError)):
        status = 400
    return JSONResponse(
        status_code=status, content={"error": type(exc).__name__, "detail": str(exc)}
    )


def create_app(config: KernelConfig, log_path=None) -> FastAPI:
    app = FastAPI(title="valori-node")
    state = new_state(config)
    writer = None
    if log_path is not None:
        import os

        if os.path.exists(log_path) and os.path.getsize(log_path) > 0:
            state, _ = replaylog.replay(log_path)
        writer = replaylog.LogWriter(log_path, state.config)
    lock = threading.Lock()
    holder = {"state": state}

    def _mutate(cmd):
        with lock:
            st = holder["state"]
            _, receipt = apply(st, cmd)
            if writer is not None:
                writer.append(cmd)
            return {"clock": receipt.clock, "state_hash": state_hash(st)}

    @app.post("/v1/insert")
    def http_insert(req: InsertRequest):
        try:
            raws = from_float_array(req.vector)
            meta = base64.b64decode(req.metadata, validate=True) if req.metadata else b""
            return _mutate(Insert(req.id, FixedVector(raws), meta))
        except binascii.Error as e:
            return _error_response(ValueError(f"bad base64 metadata: {e}"))
        except (ValoriError, ValueError) as e:
            return _error_response(e)

    @app.post("/v1/delete")
    def http_delete(req: DeleteRequest):
        try:
            return _mutate(Delete(req.id))
        except (ValoriError, ValueError) as e:
            return _error_response(e)

    @app.post("/v1/link")
    def http_link(req: LinkRequest):
        try:
            return _mutate(Link(req.a, req.b))
        except (ValoriError, ValueError) as e:
            return _error_response(e)

    @app.post("/v1/query")
    def http_query(req: QueryRequest):
        try:
            q = FixedVector(from_float_array(req.vector))
            with lock:  # queries never overlap a mutation
                st = holder["state"]
                result = query(st, q, req.k, ef_search=req.ef)
                served_hash = state_hash(st)
            return {
                "state_hash": served_hash,
                "results": [
                    {
                        "id": vid,
                        "distance_raw": str(dist),
                        "distance": str(Decimal(dist) / Decimal(1 << 32)),
                    }
                    for vid, dist in result
                ],
            }
        except (ValoriError, ValueError) as e:
            return _error_response(e)

    @app.get("/v1/snapshot")
    def http_snapshot():
        with lock:
            data = snapshot.serialize(holder["state"])
        return Response(content=data, media_type="application/octet-stream")

    @app.post("/v1/restore")
    async def http_restore(request: Request):
        data = await request.body()
        try:
            restored = snapshot.deserialize(data)
        except ValoriError as e:
            return JSONResponse(
                status_code=422, content={"error": type(e).__name__, "detail": str(e)}
            )
        if restored.config != config:
            return JSONResponse(
                status_code=409,
                content={"error": "ConfigMismatch", "detail": "snapshot config differs"},
            )
        with lock:
            holder["state"] = restored
        return {"clock": restored.clock, "state_hash": state_hash(restored)}

    @app.get("/v1/hash")
    def http_hash():
        with lock:
            return {"state_hash": state_hash(holder["state"])}

    @app.get("/v1/health")
    def http_health():
        return {"status": "ok", "clock": holder["state"].clock}

    return app


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="valori-node", description=__doc__)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8650)
    p.add_argument("--log-path", default=None)
    p.add_argument("--snapshot-dir", default=None, help="reserved; snapshots stream over HTTP")
    p.add_argument("--dim", type=int, default=384)
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--ef-construction", type=int, default=128)
    p.add_argument("--ef-search", type=int, default=768)
    p.add_argument("--precision", default="q16.16")
    args = p.parse_args(argv)
    if args.precision.lower() not in ("q16.16", "q16_16"):
        print(f"precision {args.precision!r} is not implemented")
        return 2
    config = KernelConfig(
        dim=args.dim,
        precision=Precision.Q16_16,
        hnsw=HnswParams(
            m=args.m,
            ef_construction=args.ef_construction,
            ef_search=args.ef_search,
        ),
    )
    app = create_app(config, log_path=args.log_path)

    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
