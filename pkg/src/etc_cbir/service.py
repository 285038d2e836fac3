"""HTTP service playing the untrusted third party.

The service stores uploaded encrypted images, computes their E-SIMPLE
vectors server-side with a pre-built codebook, and answers similarity
queries. It never sees a key set and has no decryption path: this module
must not import the crypto layer.
"""

from __future__ import annotations

import io
import threading
import urllib.parse
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Form, HTTPException, UploadFile
from fastapi.responses import Response
from PIL import Image, UnidentifiedImageError

from .codebook import Codebook
from .errors import DuplicateIdError
from .esimple import esimple
from .index import IndexEntry, RetrievalIndex
from .raster import BLOCK, crop_to_block_multiple

import numpy as np

_MEDIA_TYPES = {"PNG": "image/png", "JPEG": "image/jpeg"}


@dataclass
class ServiceConfig:
    codebook_path: str
    index_path: str = "index.txt"
    storage_dir: str = "storage"
    listen: str = "127.0.0.1:8000"
    top_k: int = 10


def load_config_file(path) -> dict[str, str]:
    """key=value lines; blank lines and # comments ignored."""
    out: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line is not key=value: {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _decode_upload(data: bytes):
    """Decode PNG/JPEG bytes to an RGB array; returns (image, lossy flag)."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            fmt = im.format
            if fmt not in _MEDIA_TYPES:
                raise HTTPException(400, f"unsupported image format: {fmt}")
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except UnidentifiedImageError:
        raise HTTPException(400, "payload is not a decodable image")
    h, w = arr.shape[:2]
    if h < BLOCK or w < BLOCK:
        raise HTTPException(400, f"image {w}x{h} is smaller than one {BLOCK}x{BLOCK} block")
    return arr, fmt == "JPEG"


def _check_image_id(image_id: str) -> None:
    if not image_id or any(c in image_id for c in "\t\n\r/\\"):
        raise HTTPException(400, f"invalid image_id: {image_id!r}")


class ServiceState:
    def __init__(self, cfg: ServiceConfig):
        self.cfg = cfg
        self.codebook = Codebook.load(cfg.codebook_path)
        index_path = Path(cfg.index_path)
        if index_path.exists():
            self.index = RetrievalIndex.load(index_path)
            if self.index.codebook_id != self.codebook.file_hash() or self.index.m != self.codebook.m:
                raise ValueError(
                    f"index {index_path} was built against a different codebook "
                    f"(CB={self.index.codebook_id}, M={self.index.m})"
                )
        else:
            self.index = RetrievalIndex.for_codebook(self.codebook)
        self.storage = Path(cfg.storage_dir)
        self.storage.mkdir(parents=True, exist_ok=True)
        self.write_lock = threading.Lock()


def create_app(cfg: ServiceConfig) -> FastAPI:
    state = ServiceState(cfg)
    app = FastAPI(title="etc-cbir third party")
    app.state.service = state

    @app.get("/health")
    def health():
        return {"status": "ok", "indexed": len(state.index)}

    @app.post("/images", status_code=201)
    def upload_image(image: UploadFile, image_id: str = Form(...), owner_info: str = Form("")):
        _check_image_id(image_id)
        if any(c in owner_info for c in "\t\n\r"):
            raise HTTPException(400, "owner_info must not contain tabs or newlines")
        data = image.file.read()
        arr, lossy = _decode_upload(data)
        vector = esimple(crop_to_block_multiple(arr), state.codebook)
        suffix = ".jpg" if lossy else ".png"
        stored = state.storage / (urllib.parse.quote(image_id, safe="") + suffix)
        with state.write_lock:
            if image_id in state.index:
                raise HTTPException(409, f"image_id already stored: {image_id}")
            stored.write_bytes(data)
            state.index.add(
                IndexEntry(
                    image_id=image_id,
                    vector=vector,
                    owner_info=owner_info,
                    stored_path=str(stored),
                )
            )
            state.index.save(state.cfg.index_path)
        return {"image_id": image_id, "lossy": lossy, "indexed": len(state.index)}

    @app.post("/query")
    def query_image(image: UploadFile, k: int | None = Form(None)):
        top_k = state.cfg.top_k if k is None else k
        if top_k < 1:
            raise HTTPException(400, f"k must be >= 1, got {top_k}")
        arr, lossy = _decode_upload(image.file.read())
        vector = esimple(crop_to_block_multiple(arr), state.codebook)
        results = state.index.query(vector, k=top_k)
        return {
            "results": [
                {
                    "rank": r.rank,
                    "image_id": r.image_id,
                    "owner_info": state.index.get(r.image_id).owner_info,
                    "distance": r.distance,
                }
                for r in results
            ],
            "k": top_k,
            "lossy": lossy,
        }

    @app.get("/images/{image_id}")
    def get_image(image_id: str):
        if image_id not in state.index:
            raise HTTPException(404, f"unknown image_id: {image_id}")
        entry = state.index.get(image_id)
        data = Path(entry.stored_path).read_bytes()
        media = "image/jpeg" if entry.stored_path.endswith(".jpg") else "image/png"
        return Response(content=data, media_type=media)

    return app


def serve(cfg: ServiceConfig) -> None:
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    host, _, port = cfg.listen.rpartition(":")
    uvicorn.run(create_app(cfg), host=host or "127.0.0.1", port=int(port))
