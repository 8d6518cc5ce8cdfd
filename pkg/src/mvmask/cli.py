"""Command-line client for the pipeline.

Every subcommand talks HTTP to the edge-server API: by default to an
in-process instance (no socket, same filesystem), or to a remote server via
--server URL. Exit codes: 0 success, 1 usage error, 2 data error.

Defaults reproduce the reference operating point: patch size 20, ratio 0.7,
kappa 0.15, one 2x downscale step before masking, 24 bits per pixel (fixed
by the wire format).
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import json
import sys
from pathlib import Path

import httpx


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; 2 is reserved for data errors
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class _DataError(Exception):
    pass


class _InProcessClient:
    """Synchronous facade over the ASGI app, no socket involved."""

    def __init__(self) -> None:
        from .service import create_app

        self._transport = httpx.ASGITransport(app=create_app())

    def post(self, route: str, json: dict) -> httpx.Response:
        return asyncio.run(self._request("POST", route, json))

    def get(self, route: str) -> httpx.Response:
        return asyncio.run(self._request("GET", route, None))

    async def _request(self, method: str, route: str, body: dict | None) -> httpx.Response:
        async with httpx.AsyncClient(
            transport=self._transport, base_url="http://mvmask.internal", timeout=None
        ) as client:
            return await client.request(method, route, json=body)

    def __enter__(self) -> "_InProcessClient":
        return self

    def __exit__(self, *exc) -> None:
        pass


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    return _InProcessClient()


def _call(client: httpx.Client, route: str, body: dict) -> dict:
    resp = client.post(route, json=body)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise _DataError(f"{route}: {detail}")
    return resp.json()


def _b64_file(path: str) -> str:
    return base64.b64encode(Path(path).read_bytes()).decode("ascii")


def _write(path: str, data: bytes) -> None:
    Path(path).write_bytes(data)


def _mask_body(args: argparse.Namespace) -> dict:
    body = {
        "ratio": args.ratio,
        "kappa": args.kappa,
        "mode": args.mode,
        "seed": args.seed,
        "patch_size": args.patch_size,
        "downscale": args.downscale,
    }
    if args.image:
        body["image_b64"] = _b64_file(args.image)
    if args.mask:
        body["mask_b64"] = _b64_file(args.mask)
    return body


def _cmd_mask(args, client) -> int:
    out = _call(client, "/mask", _mask_body(args))
    _write(args.out, base64.b64decode(out["plan_b64"]))
    print(
        f"plan: mode={out['mode']} r={out['ratio']} "
        f"keep {out['unmasked_count']}/{out['grid']['patch_count']} patches -> {args.out}"
    )
    return 0


def _cmd_encode(args, client) -> int:
    body = _mask_body(args)
    body["camera_id"] = args.camera_id
    body["frame_id"] = args.frame_id
    if args.plan:
        body["plan_b64"] = _b64_file(args.plan)
    out = _call(client, "/encode", body)
    _write(args.out, base64.b64decode(out["frame_b64"]))
    print(
        f"frame: {out['frame_bytes']} bytes "
        f"(payload {out['payload_bits']} bits, index {out['index_bits']} bits) -> {args.out}"
    )
    return 0


def _cmd_decode(args, client) -> int:
    out = _call(client, "/decode", {"frame_b64": _b64_file(args.frame)})
    prefix = args.out
    _write(f"{prefix}.ppm", base64.b64decode(out["sparse_b64"]))
    _write(f"{prefix}_known.pgm", base64.b64decode(out["known_b64"]))
    _write(f"{prefix}_plan.bin", base64.b64decode(out["plan"]["plan_b64"]))
    plan = out["plan"]
    print(
        f"decoded: mode={plan['mode']} r={plan['ratio']} "
        f"{plan['unmasked_count']}/{plan['grid']['patch_count']} patches -> "
        f"{prefix}.ppm, {prefix}_known.pgm, {prefix}_plan.bin"
    )
    return 0


def _cmd_fill(args, client) -> int:
    out = _call(
        client, "/fill", {"frame_b64": _b64_file(args.frame), "method": args.fill_method}
    )
    _write(args.out, base64.b64decode(out["image_b64"]))
    print(f"filled ({args.fill_method}) -> {args.out}")
    return 0


def _cmd_project(args, client) -> int:
    out = _call(
        client,
        "/project",
        {
            "calibration_text": Path(args.calibration).read_text(),
            "direction": args.direction,
            "a": args.a,
            "b": args.b,
        },
    )
    print(f"{out['a']!r} {out['b']!r}")
    return 0


def _cmd_report(args, client) -> int:
    body = {
        "cameras": args.cameras,
        "ratio": args.ratio,
        "patch_size": args.patch_size,
        "width": args.width,
        "height": args.height,
        "mode": args.mode,
        "header_policy": args.header_policy,
    }
    if args.original_size:
        try:
            w, h = (int(part) for part in args.original_size.lower().split("x"))
        except ValueError:
            raise _DataError(f"--original-size must look like 1280x720, got {args.original_size!r}")
        body["original_width"], body["original_height"] = w, h
    out = _call(client, "/report", body)
    print(f"{out['megabits']:.2f} Mb")
    if args.verbose:
        print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _cmd_simulate(args, client) -> int:
    body = {
        "scenario_text": Path(args.scenario).read_text(),
        "base_dir": str(Path(args.scenario).parent),
        "workers": args.workers,
    }
    if args.bev_dir:
        body["bev_dir"] = args.bev_dir
    out = _call(client, "/simulate", body)
    report = out["report"]
    text = json.dumps(report, sort_keys=True, separators=(",", ":"))
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.frames_csv:
        Path(args.frames_csv).write_text(out["frames_csv"])
    s = report["summary"]
    print(
        f"frames={report['scenario']['frames']} mean_active={s['mean_active']:.2f} "
        f"total_bits={s['total_bits']} throughput={s['throughput_bits_per_s']:.0f} bits/s",
        file=sys.stderr,
    )
    return 0


def _cmd_sweep(args, client) -> int:
    body = {
        "masks_b64": [_b64_file(p) for p in args.masks],
        "r_values": [float(v) for v in args.r_values.split(",")],
        "kappa": args.kappa,
        "modes": args.modes.split(","),
        "seeds": [int(v) for v in args.seeds.split(",")],
        "patch_size": args.patch_size,
    }
    out = _call(client, "/sweep", body)
    if args.out:
        Path(args.out).write_text(out["csv"])
        print(f"{out['rows']} rows -> {args.out}")
    else:
        sys.stdout.write(out["csv"])
    return 0


def _cmd_serve(args, _client_unused) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def _add_mask_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ratio", type=float, default=0.7, help="masking ratio r in [0, 1]")
    p.add_argument("--kappa", type=float, default=0.15, help="activity power exponent")
    p.add_argument(
        "--mode", choices=["semantic", "random"], default="semantic", help="patch selection mode"
    )
    p.add_argument("--seed", type=int, default=0, help="rng seed (64-bit)")
    p.add_argument("--patch-size", type=int, default=20, dest="patch_size")
    p.add_argument(
        "--downscale",
        type=int,
        default=1,
        help="2x downsampling steps applied before masking (default 1)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvmask", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--server", default=None, help="edge server URL (default: run in-process)"
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mask", help="draw a mask plan and save it")
    p.add_argument("image", nargs="?", default=None, help="PPM image (fixes dimensions)")
    p.add_argument("mask", nargs="?", default=None, help="PGM segmentation mask")
    p.add_argument("-o", "--out", required=True, help="output plan file")
    _add_mask_flags(p)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("encode", help="mask an image and serialize the frame")
    p.add_argument("image", help="PPM image")
    p.add_argument("mask", nargs="?", default=None, help="PGM segmentation mask")
    p.add_argument("-o", "--out", required=True, help="output frame file")
    p.add_argument("--plan", default=None, help="reuse a saved plan instead of drawing one")
    p.add_argument("--camera-id", type=int, default=0, dest="camera_id")
    p.add_argument("--frame-id", type=int, default=0, dest="frame_id")
    _add_mask_flags(p)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="decode a frame into sparse image + plan")
    p.add_argument("frame", help="wire frame file")
    p.add_argument(
        "-o", "--out", required=True, help="output prefix (.ppm, _known.pgm, _plan.bin)"
    )
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("fill", help="decode a frame and fill masked patches")
    p.add_argument("frame", help="wire frame file")
    p.add_argument("-o", "--out", required=True, help="output PPM")
    p.add_argument(
        "--fill-method",
        choices=["zero", "global-mean", "nearest-patch"],
        default="nearest-patch",
        dest="fill_method",
    )
    p.set_defaults(func=_cmd_fill)

    p = sub.add_parser("project", help="map between ground plane and pixels")
    p.add_argument("calibration", help="camera calibration text file")
    p.add_argument("a", type=float, help="x meters (or u pixels)")
    p.add_argument("b", type=float, help="y meters (or v pixels)")
    p.add_argument(
        "--direction",
        choices=["ground-to-pixel", "pixel-to-ground"],
        default="ground-to-pixel",
    )
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("report", help="exact communication-volume accounting")
    p.add_argument("--cameras", type=int, default=7)
    p.add_argument("--ratio", type=float, default=0.7)
    p.add_argument("--patch-size", type=int, default=20, dest="patch_size")
    p.add_argument("--width", type=int, default=640, help="transmitted image width")
    p.add_argument("--height", type=int, default=360, help="transmitted image height")
    p.add_argument("--mode", choices=["semantic", "random"], default="semantic")
    p.add_argument(
        "--header-policy",
        choices=["payload-only", "include"],
        default="payload-only",
        dest="header_policy",
    )
    p.add_argument(
        "--original-size",
        default=None,
        dest="original_size",
        help="capture resolution for the baseline, e.g. 1280x720 (default: 2x transmitted)",
    )
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("simulate", help="run a scenario end to end")
    p.add_argument("scenario", help="scenario config file (key = value lines)")
    p.add_argument("-o", "--out", default=None, help="write aggregate JSON report here")
    p.add_argument("--frames-csv", default=None, dest="frames_csv")
    p.add_argument("--bev-dir", default=None, dest="bev_dir", help="dump per-frame BEV PGMs")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="retention sweep over masks/ratios/seeds")
    p.add_argument("masks", nargs="+", help="PGM segmentation masks")
    p.add_argument("--r-values", default="0.5,0.7,0.9", dest="r_values")
    p.add_argument("--kappa", type=float, default=0.15)
    p.add_argument("--modes", default="semantic,random")
    p.add_argument("--seeds", default="0")
    p.add_argument("--patch-size", type=int, default=20, dest="patch_size")
    p.add_argument("-o", "--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("serve", help="run the edge server over HTTP")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args, None)
        with _client(args.server) as client:
            return args.func(args, client)
    except (_DataError, OSError, httpx.HTTPError) as exc:
        print(f"mvmask: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
