#!/usr/bin/env python3
"""Fixture web service: a handful of static routes with the flag
parked behind a directory that robots.txt politely advertises.
Responses are fully deterministic (no Date/Server headers)."""

import argparse
import http.server

PAGES = {
    "/": (
        "text/html",
        '<html><body><h1>acme intranet</h1>'
        '<a href="/about">about</a> <a href="/robots.txt">robots</a>'
        "</body></html>",
    ),
    "/about": ("text/html", "<html><body>internal tooling portal</body></html>"),
    "/robots.txt": ("text/plain", "User-agent: *\nDisallow: /backup/\n"),
    "/backup/": ("text/html", '<html><body><a href="/backup/flag.txt">flag.txt</a></body></html>'),
    "/backup/flag.txt": ("text/plain", "flag{r0bots_kn0w_s3cr3ts}\n"),
}


class Handler(http.server.BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def do_GET(self):  # noqa: N802 (fixed name from BaseHTTPRequestHandler)
        content_type, body = PAGES.get(self.path, ("text/plain", "not found\n"))
        status = 200 if self.path in PAGES else 404
        data = body.encode("utf-8")
        self.send_response_only(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, required=True)
    args = parser.parse_args()
    server = http.server.ThreadingHTTPServer(("127.0.0.1", args.port), Handler)
    server.serve_forever()


if __name__ == "__main__":
    main()
