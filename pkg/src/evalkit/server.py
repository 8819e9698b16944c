"""Read-only local server for results, manifest, and the guide UI.

Endpoints:
    GET /api/manifest      experiment manifest view
    GET /api/results       analysis/results.json
    GET /api/meta          analysis/meta_eval.json
    GET /api/guide/kb      the evaluation-method knowledge base
    GET /<path>            static guide assets (when a UI directory exists)

Everything is read-only; any non-GET request is rejected.
"""

from __future__ import annotations

import json
import logging
from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from pathlib import Path

from .project import Project

logger = logging.getLogger(__name__)


def _kb_text() -> str:
    return resources.files("evalkit.assets").joinpath("guide_kb.json").read_text(
        encoding="utf-8"
    )


def default_ui_dir(project_root: Path) -> Path | None:
    """Prefer a UI bundle in the project, then the packaged one."""
    candidates = [project_root / "ui"]
    packaged = resources.files("evalkit.assets") / "ui"
    try:
        candidates.append(Path(str(packaged)))
    except TypeError:
        pass
    for candidate in candidates:
        if candidate.is_dir():
            return candidate
    return None


def make_server(
    project_root: str | Path, port: int = 8000, ui_dir: str | Path | None = None
) -> ThreadingHTTPServer:
    root = Path(project_root)
    static_dir = Path(ui_dir) if ui_dir else default_ui_dir(root)

    class Handler(SimpleHTTPRequestHandler):
        def __init__(self, *args, **kwargs):
            super().__init__(*args, directory=str(static_dir or root), **kwargs)

        def log_message(self, fmt, *args):
            logger.debug("%s " + fmt, self.client_address[0], *args)

        def _send_json(self, payload: str, code: int = 200):
            body = payload.encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _send_file_json(self, path: Path, missing: str):
            if not path.exists():
                self._send_json(json.dumps({"error": missing}), code=404)
                return
            self._send_json(path.read_text(encoding="utf-8"))

        def do_GET(self):
            if self.path == "/api/manifest":
                view = {
                    key: {
                        "status": entry.status,
                        "config": entry.config,
                        "n_samples": entry.n_samples,
                        "log": entry.log,
                        "created": entry.created,
                        "updated": entry.updated,
                    }
                    for key, entry in Project(root, create=False).experiments.items()
                }
                self._send_json(json.dumps({"experiments": view}))
            elif self.path == "/api/results":
                self._send_file_json(
                    root / "analysis" / "results.json",
                    "no results yet; run the analyse command",
                )
            elif self.path == "/api/meta":
                self._send_file_json(
                    root / "analysis" / "meta_eval.json",
                    "no meta-evaluation yet; run the meta command",
                )
            elif self.path == "/api/guide/kb":
                self._send_json(_kb_text())
            elif static_dir is None:
                self._send_json(json.dumps({"error": "no UI assets installed"}), 404)
            else:
                super().do_GET()

        def do_POST(self):
            self.send_error(405, "server is read-only")

        do_PUT = do_DELETE = do_PATCH = do_POST

    return ThreadingHTTPServer(("127.0.0.1", port), Handler)


def serve(project_root: str | Path, port: int = 8000, ui_dir: str | Path | None = None):
    server = make_server(project_root, port=port, ui_dir=ui_dir)
    host, bound_port = server.server_address
    logger.info("serving on http://%s:%s/", host, bound_port)
    print(f"serving on http://{host}:{bound_port}/ (ctrl-c to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
