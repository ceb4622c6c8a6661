"""Run the review service on a given data dir and port (integration tests)."""

import sys

import uvicorn

from masktrack.service import create_app

if __name__ == "__main__":
    uvicorn.run(
        create_app(sys.argv[1]),
        host="127.0.0.1",
        port=int(sys.argv[2]),
        log_level="warning",
    )
