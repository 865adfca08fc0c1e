"""
What a scheduling mistake looks like
====================================

Add a tenth sensor that shares slot 1 but starts 20 ms late. Its frame
overlaps the second half of node 1's frame and the first 10 ms of node 2's.
Node 1 loses its sync word and the rogue frame is never locked. Node 2 only
loses preamble bits, which the receiver tolerates, so it still gets through.
"""

from wsnsim.config import parse_config, preset_text
from wsnsim.phy import ber_for_snir
from wsnsim.scenario import simulate

rogue = """
[node.10]
role = sensor
x = 50
y = 85.3553
slot = 1
slot_shift_ms = 20
"""
text = preset_text("static").replace("until_s = 3600", "until_s = 1") + rogue
res = simulate(parse_config(text), keep_outcomes=True)

for o in res.outcomes:
    rec = o.record
    if rec.receiver != 0 or rec.frame.sender == 0:
        continue
    verdict = "ok" if o.decoded else o.reason
    print(f"frame from node {rec.frame.sender}: {rec.rx_power_dbm:.2f} dBm, {verdict}")
    for s in rec.segments:
        print(f"    {s.start / 1e6:9.3f}-{s.end / 1e6:9.3f} ms  SNIR {s.snir:10.3f}  BER {ber_for_snir(s.snir):.2e}")

print("logged senders:", sorted({r.sender_id for r in res.rssi_log}))
