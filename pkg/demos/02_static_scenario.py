"""
Static RSSI read-out
====================

A base station in the middle of a 100 m field polls nine sensors once a second.
"""

import collections
import time

from wsnsim.config import parse_config, preset_text
from wsnsim.scenario import simulate

# one simulated minute is enough to see the pattern; the preset runs an hour
text = preset_text("static").replace("until_s = 3600", "until_s = 60")
cfg = parse_config(text)

t0 = time.perf_counter()
res = simulate(cfg)
print(f"{res.summary.events_dispatched} events in {time.perf_counter() - t0:.2f} s")
print("frames sent:", res.summary.frames_sent)
print("drops by reason:", res.summary.frames_dropped)

# every sensor reports the same value every round: the channel is static
per_sender = collections.defaultdict(set)
for r in res.rssi_log:
    per_sender[r.sender_id].add(r.rssi_dbm)
for n in cfg.sensors:
    print(f"node {n.id} at {n.mobility.pos}: RSSI {sorted(per_sender[n.id])}")

# where the energy goes
for node, entry in sorted(res.energy.items()):
    worst = max(entry["breakdown"].items(), key=lambda kv: kv[1])
    print(f"node {node}: {entry['total'] * 1e3:8.3f} mJ, mostly {worst[0]}")
