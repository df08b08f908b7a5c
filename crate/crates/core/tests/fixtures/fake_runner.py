"""Stand-in CAD runner for bridge tests.

Answers every request with a unit cube STL unless the code contains one of
the trigger words below.
"""
import json
import os
import sys
import time

CUBE = [
    ((0, 0, 0), (0, 1, 0), (1, 1, 0)), ((0, 0, 0), (1, 1, 0), (1, 0, 0)),
    ((0, 0, 1), (1, 0, 1), (1, 1, 1)), ((0, 0, 1), (1, 1, 1), (0, 1, 1)),
    ((0, 0, 0), (1, 0, 0), (1, 0, 1)), ((0, 0, 0), (1, 0, 1), (0, 0, 1)),
    ((0, 1, 0), (0, 1, 1), (1, 1, 1)), ((0, 1, 0), (1, 1, 1), (1, 1, 0)),
    ((0, 0, 0), (0, 0, 1), (0, 1, 1)), ((0, 0, 0), (0, 1, 1), (0, 1, 0)),
    ((1, 0, 0), (1, 1, 0), (1, 1, 1)), ((1, 0, 0), (1, 1, 1), (1, 0, 1)),
]


def write_cube(path):
    with open(path, "w") as f:
        f.write("solid cube\n")
        for tri in CUBE:
            f.write("facet normal 0 0 0\nouter loop\n")
            for v in tri:
                f.write("vertex %g %g %g\n" % v)
            f.write("endloop\nendfacet\n")
        f.write("endsolid cube\n")


def reply(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


marker = sys.argv[2] if len(sys.argv) > 2 and sys.argv[1] == "--marker" else None
if marker:
    with open(marker, "a") as f:
        f.write("start\n")

for line in sys.stdin:
    req = json.loads(line)
    code = req["code"]
    if "STALL" in code:
        time.sleep(3600)
    if "CRASH" in code:
        sys.exit(3)
    if "GARBAGE" in code:
        sys.stdout.write("not json\n")
        sys.stdout.flush()
        continue
    if "FAIL" in code:
        reply({"id": req["id"], "ok": False, "error": "runtime: ZeroDivisionError: division by zero"})
        continue
    path = os.path.join(req["out_dir"], "%d.stl" % req["id"])
    write_cube(path)
    reply({"id": req["id"], "ok": True, "stl_path": path})
