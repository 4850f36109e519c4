"""Checks the files and messages an operator console consumes against docs/*.json.

usage: check_interfaces.py <towerfleet binary> <repo root>
"""

import asyncio
import json
import pathlib
import socket
import subprocess
import sys
import tempfile

import jsonschema
import websockets
from referencing import Registry, Resource

LOG_FILES = ["telemetry.csv", "commands.jsonl", "decisions.jsonl", "events.jsonl", "snapshots.jsonl",
             "bus_stats.json", "metrics.json"]
TELEMETRY_HEADER = "t,uav,px,py,pz,vx,vy,vz,ax,ay,az,psi,battery,status"

binary = pathlib.Path(sys.argv[1])
root = pathlib.Path(sys.argv[2])
scenario_schema = json.loads((root / "docs/scenario_schema.json").read_text())
gateway_schema = json.loads((root / "docs/gateway_schema.json").read_text())
registry = Registry().with_resources([
    (scenario_schema["$id"], Resource.from_contents(scenario_schema)),
    (gateway_schema["$id"], Resource.from_contents(gateway_schema)),
])
scenario_v = jsonschema.Draft202012Validator(scenario_schema, registry=registry)
gateway_v = jsonschema.Draft202012Validator(gateway_schema, registry=registry)
failures = []


def check(label, ok, detail=""):
    print(("ok   " if ok else "FAIL ") + label + (": " + detail if detail else ""))
    if not ok:
        failures.append(label)


def errors(validator, doc):
    return [f"{list(e.absolute_path)}: {e.message[:160]}" for e in validator.iter_errors(doc)][:3]


def check_log(out, label):
    missing = [f for f in LOG_FILES if not (out / f).is_file()]
    check(f"{label} layout", not missing, "missing " + ", ".join(missing) if missing else "")
    if missing:
        return
    header = (out / "telemetry.csv").read_text().splitlines()[0]
    check(f"{label} telemetry header", header == TELEMETRY_HEADER, header)
    bad = []
    for i, line in enumerate((out / "snapshots.jsonl").read_text().splitlines()):
        msg = {"type": "snapshot", "seq": i + 2, "data": json.loads(line)}
        bad += errors(gateway_v, msg)
    check(f"{label} snapshots match the snapshot schema", not bad, "; ".join(bad[:3]))
    for f in ["commands.jsonl", "decisions.jsonl", "events.jsonl"]:
        for line in (out / f).read_text().splitlines():
            json.loads(line)
    metrics = json.loads((out / "metrics.json").read_text())
    for key in ["min_pairwise_distance", "min_obstacle_clearance", "fov", "executed_plans", "task_completion",
                "region_completion", "mission_complete", "safety_violations"]:
        check(f"{label} metrics has {key}", key in metrics)


# Scenario files.
files = sorted((root / "scenarios").glob("*.json")) + sorted((root / "tests/fixtures").glob("*.json"))
for f in files:
    doc = json.loads(f.read_text())
    if isinstance(doc, list):
        continue  # oracle fixtures, not scenarios
    errs = errors(scenario_v, doc)
    check(f"scenario {f.name}", not errs, "; ".join(errs))

with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)

    # Headless run.
    out = tmp / "headless"
    run = subprocess.run([binary, "--scenario", root / "scenarios/safety_desk.json", "--duration", "3", "--out", out],
                         capture_output=True, text=True)
    outcome = json.loads(run.stdout.strip().splitlines()[-1])
    check("headless exit code matches outcome", run.returncode == outcome["code"], run.stdout.strip())
    check_log(out, "headless log")

    # Served run with a live client.
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    out = tmp / "served"
    proc = subprocess.Popen([binary, "--scenario", root / "scenarios/safety_desk.json", "--duration", "4",
                             "--serve=" + str(port), "--speed", "4", "--out", out],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)

    async def session():
        for _ in range(100):
            try:
                ws = await websockets.connect(f"ws://127.0.0.1:{port}/")
                break
            except OSError:
                await asyncio.sleep(0.05)
        else:
            raise RuntimeError("gateway did not come up")
        received = []
        async with ws:
            first = json.loads(await ws.recv())
            received.append(first)
            sent = [
                {"type": "command", "seq": 1, "command": {"type": "set_formation", "distance": 6}},
                {"type": "command", "seq": 2, "command": {"type": "inject_failure", "uav": 77}},
                {"type": "command", "seq": 3, "command": {"type": "warp"}},
            ]
            for m in sent[:2]:
                check(f"client command {m['seq']} matches the schema", not errors(gateway_v, m))
            for m in sent:
                await ws.send(json.dumps(m))
            try:
                while True:
                    received.append(json.loads(await asyncio.wait_for(ws.recv(), 2.0)))
            except (asyncio.TimeoutError, websockets.ConnectionClosed):
                pass
        return first, received

    first, received = asyncio.run(session())
    proc.wait(timeout=60)
    check("first message is the scenario with seq 1", first.get("type") == "scenario" and first.get("seq") == 1)
    bad = [e for m in received for e in errors(gateway_v, m)]
    check(f"{len(received)} server messages match the gateway schema", not bad, "; ".join(bad[:3]))
    seqs = [m["seq"] for m in received]
    check("server seq increases by one", seqs == list(range(1, len(seqs) + 1)))
    acks = {m["ref"]: m for m in received if m["type"] == "ack"}
    check("valid command accepted", acks.get(1, {}).get("status") == "accepted")
    check("unknown uav rejected as invalid", acks.get(2, {}).get("reason", "").startswith("invalid"))
    check("unknown type rejected as a schema violation", acks.get(3, {}).get("reason", "").startswith("schema violation"))
    check("snapshots streamed", any(m["type"] == "snapshot" for m in received))
    check_log(out, "served log")
    check("gateway stats written", (out / "gateway_stats.json").is_file())
    events = [json.loads(l) for l in (out / "events.jsonl").read_text().splitlines()]
    check("accepted command logged as an operator event",
          any(e["kind"] == "operator" and e["command"].get("distance") == 6 for e in events))

print(f"{len(failures)} failed")
sys.exit(1 if failures else 0)
