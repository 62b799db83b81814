from __future__ import annotations

import io as _io
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from volray import RaycastConfig, Scene, framing_camera, orbit_camera, render_frame
from volray.io import bundled_preset
from volray.service import create_app
from volray.synthetic import sphere_volume

WIDTH, HEIGHT = 32, 24


@pytest.fixture(scope="module")
def volume():
    return sphere_volume(dims=(16, 16, 16))


@pytest.fixture(scope="module")
def client(volume):
    app = create_app(volume, width=WIDTH, height=HEIGHT, workers=1, step=0.5)
    with TestClient(app) as c:
        yield c


def recv_frame(ws):
    msg = json.loads(ws.receive_text())
    assert msg["type"] == "frame"
    blob = ws.receive_bytes()
    return msg, blob


def decode_png(blob: bytes) -> np.ndarray:
    return np.asarray(Image.open(_io.BytesIO(blob)))


class TestSession:
    def test_hello_then_default_frame(self, client, volume):
        with client.websocket_connect("/ws") as ws:
            hello = json.loads(ws.receive_text())
            assert hello["type"] == "hello"
            assert hello["dims"] == [16, 16, 16]
            assert hello["spacing"] == [1.0, 1.0, 1.0]
            hist = hello["histogram"]
            assert hist["bin_count"] == 64
            assert sum(hist["counts"]) == 16**3
            names = {p["name"] for p in hello["presets"]}
            assert {"grayscale-ramp", "soft-tissue", "bone-bright"} <= names
            msg, blob = recv_frame(ws)
            assert msg["seq"] == 1
            assert msg["width"] == WIDTH and msg["height"] == HEIGHT
            pixels = decode_png(blob)
            assert pixels.shape == (HEIGHT, WIDTH, 4)
            assert msg["stats"]["rays"] == WIDTH * HEIGHT

    def test_first_frame_matches_direct_render(self, client, volume):
        preset = bundled_preset("grayscale-ramp")
        scene = Scene(
            volume=volume,
            tf=preset.to_transfer_function(),
            camera=framing_camera(volume),
            config=RaycastConfig(step=0.5, reference_step=preset.reference_step),
        )
        want, _ = render_frame(scene, WIDTH, HEIGHT, 1)
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            _, blob = recv_frame(ws)
            assert np.array_equal(decode_png(blob), want.pixels)

    def test_update_renders_new_frame_with_higher_seq(self, client, volume):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            first, first_blob = recv_frame(ws)
            cam = orbit_camera((7.5, 7.5, 7.5), 40.0, 90.0, 0.0)
            ws.send_text(json.dumps({
                "type": "update",
                "camera": {"position": list(cam.position), "target": list(cam.target)},
            }))
            second, second_blob = recv_frame(ws)
            assert second["seq"] > first["seq"]
            assert second_blob != first_blob

    def test_malformed_messages_keep_session_alive(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            recv_frame(ws)
            ws.send_text("{{{not json")
            err = json.loads(ws.receive_text())
            assert err["type"] == "error" and "JSON" in err["message"]
            ws.send_text(json.dumps({"type": "bogus"}))
            err = json.loads(ws.receive_text())
            assert err["type"] == "error"
            # invalid TF (unsorted) is reported, state survives
            ws.send_text(json.dumps({
                "type": "update",
                "tf": {"points": [
                    {"scalar": 0.7, "color": [0, 0, 0], "opacity": 0.0},
                    {"scalar": 0.2, "color": [1, 1, 1], "opacity": 1.0},
                ]},
            }))
            err = json.loads(ws.receive_text())
            assert err["type"] == "error"
            # a valid update is still honored afterwards
            ws.send_text(json.dumps({"type": "update", "config": {"mode": "mip"}}))
            msg, _ = recv_frame(ws)
            assert msg["seq"] == 2

    def test_tf_update_changes_pixels(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            _, before = recv_frame(ws)
            ws.send_text(json.dumps({
                "type": "update",
                "tf": {"points": [
                    {"scalar": 0.0, "color": [1.0, 0.0, 0.0], "opacity": 0.9},
                    {"scalar": 1.0, "color": [1.0, 1.0, 0.0], "opacity": 1.0},
                ]},
            }))
            _, after = recv_frame(ws)
            assert not np.array_equal(decode_png(before), decode_png(after))

    def test_rapid_updates_coalesce_to_final_state(self, client, volume):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            recv_frame(ws)
            azimuths = [i * 10.0 for i in range(10)]
            for az in azimuths:
                cam = orbit_camera((7.5, 7.5, 7.5), 40.0, az, 5.0)
                ws.send_text(json.dumps({
                    "type": "update",
                    "camera": {
                        "position": list(cam.position),
                        "target": list(cam.target),
                        "up": list(cam.up),
                        "vfov": cam.vfov,
                    },
                }))
            final_cam = orbit_camera((7.5, 7.5, 7.5), 40.0, azimuths[-1], 5.0)
            preset = bundled_preset("grayscale-ramp")
            want, _ = render_frame(
                Scene(
                    volume=volume,
                    tf=preset.to_transfer_function(),
                    camera=final_cam,
                    config=RaycastConfig(step=0.5, reference_step=preset.reference_step),
                ),
                WIDTH, HEIGHT, 1,
            )
            seqs = []
            for _ in range(12):
                msg, blob = recv_frame(ws)
                seqs.append(msg["seq"])
                if np.array_equal(decode_png(blob), want.pixels):
                    break
            else:
                pytest.fail("final camera state never rendered")
            assert seqs == sorted(seqs)
            assert len(seqs) < 11  # coalescing skipped intermediate states

    def test_config_update_switches_mode(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            _, before = recv_frame(ws)
            ws.send_text(json.dumps({
                "type": "update",
                "config": {"mode": "iso", "iso_value": 0.5, "step": 0.4},
            }))
            msg, after = recv_frame(ws)
            assert not np.array_equal(decode_png(before), decode_png(after))

    def test_index_route_reports_service(self, client):
        body = client.get("/").json()
        assert body["service"] == "volray"
        assert body["websocket"] == "/ws"
