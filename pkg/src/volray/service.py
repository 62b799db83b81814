"""Session service: streams rendered frames over a WebSocket and applies
viewer steering messages.

Per connection the server sends a hello (volume shape, histogram, bundled
presets), then alternates between applying the latest pending update and
rendering a frame.  Updates arriving mid-render are coalesced: sections of
newer messages overwrite older pending ones, so the client's final state is
always the next frame rendered and memory per session stays bounded.
"""

from __future__ import annotations

import asyncio
import io as _io
import json
from dataclasses import dataclass, replace
from typing import Optional

import uvicorn
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from PIL import Image

from .engine import Scene, render_frame
from .io import TfPreset, bundled_preset, bundled_preset_names
from .raycast import Camera, RaycastConfig, framing_camera
from .transfer import ControlPoint, TransferFunction
from .volume import ScalarVolume, compute_histogram

__all__ = ["SessionState", "create_app", "serve_session"]

MODE_NAMES = {
    "composite": "compositing",
    "mip": "mip",
    "average": "average",
    "iso": "isosurface",
    "threshold": "threshold",
}

HISTOGRAM_BINS = 64


class BadMessage(ValueError):
    pass


@dataclass
class SessionState:
    scene: Scene
    frame_seq: int = 0
    pending_update: Optional[dict] = None


def _parse_update(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadMessage(f"not valid JSON: {exc}")
    if not isinstance(data, dict) or data.get("type") != "update":
        raise BadMessage("expected an object with type 'update'")
    update = {}
    for section in ("camera", "tf", "config"):
        if section in data:
            if not isinstance(data[section], dict):
                raise BadMessage(f"section {section!r} must be an object")
            update[section] = data[section]
    return update


def _merge_pending(old: Optional[dict], new: dict) -> dict:
    """Coalesce: newest fields win, but earlier sections are not dropped."""
    if old is None:
        return new
    merged = dict(old)
    for section, payload in new.items():
        if section == "tf":
            merged[section] = payload
        else:
            merged[section] = {**merged.get(section, {}), **payload}
    return merged


def _vec3(value, what: str) -> tuple[float, float, float]:
    try:
        x, y, z = (float(c) for c in value)
    except (TypeError, ValueError) as exc:
        raise BadMessage(f"{what} must be three numbers: {exc}")
    return (x, y, z)


def _apply_update(scene: Scene, update: dict) -> Scene:
    camera = scene.camera
    tf = scene.tf
    config = scene.config
    if "camera" in update:
        cam = update["camera"]
        kwargs = {}
        for key in ("position", "target", "up"):
            if key in cam:
                kwargs[key] = _vec3(cam[key], f"camera.{key}")
        if "vfov" in cam:
            kwargs["vfov"] = float(cam["vfov"])
        if "projection" in cam:
            kwargs["projection"] = str(cam["projection"])
        if "ortho_height" in cam:
            kwargs["ortho_height"] = float(cam["ortho_height"])
        camera = replace(camera, **kwargs)
    if "tf" in update:
        section = update["tf"]
        if "points" in section:
            points = []
            for i, entry in enumerate(section["points"]):
                try:
                    points.append(ControlPoint(
                        scalar=float(entry["scalar"]),
                        color=tuple(float(c) for c in entry["color"]),
                        opacity=float(entry["opacity"]),
                    ))
                except (KeyError, TypeError, ValueError) as exc:
                    raise BadMessage(f"tf point {i}: {exc}")
            tf = TransferFunction(points=tuple(points), name=str(section.get("name", "custom")))
        if "reference_step" in section:
            config = replace(config, reference_step=float(section["reference_step"]))
    if "config" in update:
        section = update["config"]
        kwargs = {}
        if "mode" in section:
            mode = str(section["mode"])
            if mode not in MODE_NAMES:
                raise BadMessage(f"unknown mode {mode!r}; expected one of {sorted(MODE_NAMES)}")
            kwargs["function"] = MODE_NAMES[mode]
        for key in ("step", "iso_value", "threshold_value"):
            if key in section:
                kwargs[key] = float(section[key])
        config = replace(config, **kwargs)
    return replace(scene, camera=camera, tf=tf, config=config)


def _png_bytes(pixels) -> bytes:
    buf = _io.BytesIO()
    Image.fromarray(pixels, mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()


def _preset_payload(preset: TfPreset) -> dict:
    return {
        "name": preset.name,
        "reference_step": preset.reference_step,
        "points": [
            {"scalar": p.scalar, "color": list(p.color), "opacity": p.opacity}
            for p in preset.points
        ],
    }


def create_app(
    volume: ScalarVolume,
    tf_preset: Optional[TfPreset] = None,
    width: int = 512,
    height: int = 512,
    workers: int = 1,
    step: Optional[float] = None,
) -> FastAPI:
    preset = tf_preset if tf_preset is not None else bundled_preset("grayscale-ramp")
    hist = compute_histogram(volume, HISTOGRAM_BINS)
    hello = {
        "type": "hello",
        "dims": list(volume.dims),
        "spacing": list(volume.spacing),
        "histogram": {
            "bin_count": hist.bin_count,
            "counts": [int(c) for c in hist.counts],
            "range": list(hist.range),
        },
        "presets": [_preset_payload(bundled_preset(name)) for name in bundled_preset_names()],
    }

    def default_scene() -> Scene:
        return Scene(
            volume=volume,
            tf=preset.to_transfer_function(),
            camera=framing_camera(volume),
            config=RaycastConfig(
                step=step if step is not None else min(volume.spacing),
                reference_step=preset.reference_step,
            ),
        )

    app = FastAPI(title="volray session service")

    @app.get("/")
    def index():
        return {
            "service": "volray",
            "websocket": "/ws",
            "frame": f"{width}x{height}",
            "dims": list(volume.dims),
        }

    @app.websocket("/ws")
    async def session(ws: WebSocket):
        await ws.accept()
        state = SessionState(scene=default_scene())
        send_lock = asyncio.Lock()
        changed = asyncio.Event()
        closed = False

        async def send_error(message: str) -> None:
            async with send_lock:
                await ws.send_text(json.dumps({"type": "error", "message": message}))

        async def reader() -> None:
            nonlocal closed
            try:
                while True:
                    text = await ws.receive_text()
                    try:
                        update = _parse_update(text)
                    except BadMessage as exc:
                        await send_error(str(exc))
                        continue
                    state.pending_update = _merge_pending(state.pending_update, update)
                    changed.set()
            except WebSocketDisconnect:
                pass
            finally:
                closed = True
                changed.set()

        async def render_and_send() -> None:
            image, stats = await asyncio.to_thread(
                render_frame, state.scene, width, height, workers
            )
            state.frame_seq += 1
            data = _png_bytes(image.pixels)
            async with send_lock:
                await ws.send_text(json.dumps({
                    "type": "frame",
                    "seq": state.frame_seq,
                    "width": image.width,
                    "height": image.height,
                    "stats": stats.as_dict(),
                }))
                await ws.send_bytes(data)

        reader_task = asyncio.create_task(reader())
        try:
            await ws.send_text(json.dumps(hello))
            await render_and_send()
            while True:
                await changed.wait()
                changed.clear()
                if closed:
                    break
                update = state.pending_update
                state.pending_update = None
                if update is None:
                    continue
                try:
                    state.scene = _apply_update(state.scene, update)
                except (BadMessage, ValueError) as exc:
                    await send_error(str(exc))
                    continue
                await render_and_send()
        except WebSocketDisconnect:
            pass
        finally:
            reader_task.cancel()

    return app


def serve_session(
    volume: ScalarVolume,
    port: int = 8080,
    host: str = "127.0.0.1",
    tf_preset: Optional[TfPreset] = None,
    width: int = 512,
    height: int = 512,
    workers: int = 1,
    step: Optional[float] = None,
) -> None:
    """Serve viewer sessions until interrupted."""
    app = create_app(
        volume, tf_preset=tf_preset, width=width, height=height, workers=workers, step=step
    )
    uvicorn.run(app, host=host, port=port, log_level="info")
