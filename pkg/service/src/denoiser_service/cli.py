"""Serve entry point."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .models import MODEL_REGISTRY, ServiceConfig


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description="Run the denoiser service.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8321)
    parser.add_argument("--model", default="toy-gmm", choices=sorted(MODEL_REGISTRY))
    parser.add_argument("--native-resolution", type=int, default=64)
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)

    config = ServiceConfig(
        model=args.model,
        device=args.device,
        native_resolution=args.native_resolution,
        port=args.port,
    )
    uvicorn.run(create_app(config), host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
