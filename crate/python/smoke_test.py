"""Builds the extension module and exercises it end to end.

Usage: python3 python/smoke_test.py [--no-build]
"""
import json
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build(dest):
    subprocess.run(
        ["cargo", "build", "--release", "-p", "chromalayer-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = os.path.join(ROOT, "target", "release", "libchromalayer_py.so")
    shutil.copy(lib, os.path.join(dest, "chromalayer_py.so"))


def main():
    with tempfile.TemporaryDirectory() as tmp:
        if "--no-build" not in sys.argv:
            build(tmp)
            sys.path.insert(0, tmp)
        import chromalayer_py as cl

        scene, truth, order = cl.synth_scene(7, element_count=(4, 8), layout="random")
        assert len(scene) == len(order) > 0, scene
        assert scene.validate() == []

        layering = cl.recover_layering(scene)
        assert cl.validate_layering(scene, layering) == []
        assert layering.k <= truth.k
        assert scene.render_png(layering) == scene.render_png(truth)
        assert scene.render_png(layering)[:8] == b"\x89PNG\r\n\x1a\n"

        fg = (10.0, 200.0, 90.0, 0.4)
        shots = [cl.composite_over(fg, bg) for bg in [(255.0, 0, 0), (0, 255.0, 0), (0, 0, 255.0)]]
        b, g, r, a = cl.derive_graphic_pixel(*shots)
        assert abs(a - 0.4) < 1e-9 and max(abs(b - 10), abs(g - 200), abs(r - 90)) < 1e-6

        back = cl.Scene.from_json(scene.to_json())
        assert back.element_ids == scene.element_ids

        annotations = cl.annotate(scene, layering)
        assert {a["element_id"] for a in annotations} == set(scene.element_ids)
        for ann in annotations:
            if ann["visible"]:
                x, y, w, h = ann["bbox"]
                assert w > 0 and h > 0 and ann["area"] > 0 and ann["contours"]

        sample = os.path.join(tmp, "sample")
        cl.synth_sample(sample, 3)
        assert cl.verify_sample(sample) == []
        cl.process_sample(sample)
        assert cl.verify_sample(sample) == []
        s2, l2 = cl.read_sample(sample)
        with open(os.path.join(sample, "manifest.json")) as f:
            assert json.load(f)["schema_version"] == 1

        written = os.path.join(tmp, "written")
        cl.write_sample(written, scene, layering)
        assert cl.verify_sample(written) == []

        try:
            scene.pixel(10**6, 0, 0)
        except cl.ChromaLayerError:
            pass
        else:
            raise AssertionError("unknown element accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
