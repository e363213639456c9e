"""
Serving fixtures over HTTP with the mock backend server
=======================================================

The companion refvos-mockserver package exposes the same fixture
matching as the scripted transport, but over loopback HTTP.  Point the
primary client at it and the wire behaves exactly like the in-process
script, including structured 404s for unknown requests.
"""

import requests

from refvos.backends import BackendEndpoint, judge_exists
from refvos_mockserver import serve

fixtures = {
    "asr": [],
    "judge": [
        {"request": {"video_ref": "clip", "phrase": "the brown dog"},
         "response": {"exists": True}},
    ],
    "segment": [],
    "refine": [],
}

with serve(fixtures) as server:
    print("listening on", server.base_url)

    endpoint = BackendEndpoint(kind="judge", transport="http", address=server.base_url)
    verdict = judge_exists(endpoint, "clip", [0, 4, 8], "the brown dog")
    print("judge verdict over HTTP:", verdict.exists)

    # Unmatched requests come back as structured errors, same as the
    # scripted transport's miss.
    r = requests.post(server.base_url + "/judge",
                      json={"video_ref": "clip", "phrase": "the unicorn",
                            "frame_indices": [0]},
                      timeout=5)
    print("miss status:", r.status_code, "code:", r.json()["error"]["code"])

print("server stopped")
