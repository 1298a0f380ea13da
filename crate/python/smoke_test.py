#!/usr/bin/env python3
"""Smoke test for the siglink_py extension module.

Builds nothing itself: expects `cargo build -p siglink-py [--release]` to
have produced the cdylib under target/. Run as:

    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libsiglink_py.so"
        if lib.exists():
            staged = Path(tempfile.mkdtemp(prefix="siglink_py_")) / "siglink_py.so"
            shutil.copyfile(lib, staged)
            sys.path.insert(0, str(staged.parent))
            import siglink_py

            return siglink_py
    sys.exit("libsiglink_py.so not found; run `cargo build -p siglink-py` first")


def main():
    sl = load_module()

    # closed-form queueing: hand-checked M/M/2 value and zero-load limits
    assert math.isclose(sl.waiting_probability(2, 1.0, 1.0), 1.0 / 3.0, rel_tol=1e-12)
    assert math.isclose(sl.idle_probability(1, 0.5, 1.0), 0.5, rel_tol=1e-12)
    displays = [(10, 0.5), (10, 0.3), (10, 0.2)]
    verbatim = sl.system_rejection_probability(displays, 0.1, "verbatim")
    corrected = sl.system_rejection_probability(displays, 0.1, "corrected")
    assert 0.0 <= corrected < verbatim <= 1.0
    assert 0.0 <= sl.link_utilization(displays, 0.1, "corrected") <= 1.0

    # simulation: deterministic under a fixed seed, Erlang-C in the ballpark
    kwargs = dict(service_rate=1.0, policy="static", seed=11, total_arrivals=40000)
    m1 = sl.simulate([(2, 1.0)], **kwargs)
    m2 = sl.simulate([(2, 1.0)], **kwargs)
    assert m1 == m2
    assert abs(m1["wait_probability"] - 1.0 / 3.0) < 0.02
    assert m1["dropped"] == 0

    dyn = sl.simulate([(1, 0.9), (1, 0.1)], service_rate=1.0, policy="dynamic",
                      seed=3, total_arrivals=40000)
    stat = sl.simulate([(1, 0.9), (1, 0.1)], service_rate=1.0, policy="static",
                       seed=3, total_arrivals=40000)
    assert dyn["wait_probability"] < stat["wait_probability"]

    # codec: embed/extract roundtrip, invisibility, and PPM I/O
    frame = sl.Frame.uniform(64, 32, (90, 120, 150))
    bits = [True, False, True, True, False, False, True, False]
    data = sl.embed_bits(frame, bits)
    assert sl.extract_bits(frame, data) == bits
    noisy = sl.distort(data, gain=1.02, offset=3, noise_sigma=0.4, seed=9)
    ref_noisy = sl.distort(frame, gain=1.02, offset=3, noise_sigma=0.4, seed=9)
    assert sl.extract_bits(ref_noisy, noisy) == bits

    report = sl.invisibility_report(frame, data)
    assert report["green_unchanged"]
    assert report["psnr_db"] > 35.0
    assert report["max_mean_shift"] <= 4.0

    _, green, _ = sl.histogram(data)
    assert green[120] == 64 * 32

    with tempfile.TemporaryDirectory() as d:
        path = str(Path(d) / "frame.ppm")
        data.save_ppm(path)
        assert sl.Frame.load_ppm(path) == data

    # framing: CRC check value and text roundtrip
    assert sl.crc8(b"123456789") == 0xF4
    assert sl.deframe_payload(sl.frame_payload("http://example")) == "http://example"
    assert math.isclose(sl.stream_throughput(30.0, 8), 120.0)

    print("smoke test passed")


if __name__ == "__main__":
    main()
