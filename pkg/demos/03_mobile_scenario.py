"""
A sensor walking around the base station
========================================

The mobile preset stops at 19 points on an 80 x 40 m rectangle and sends one
packet at each stop. Continuous motion with a random start offset moves the
stops slightly, which shows up as at most 1 dB in the quantized RSSI.
"""

from wsnsim.config import parse_config, preset_text
from wsnsim.scenario import simulate

base = preset_text("mobile")
discrete = simulate(parse_config(base))
moved = simulate(parse_config(
    base.replace("mode = discrete", "mode = continuous")
        .replace("# start_offset_seed = 7", "start_offset_seed = 7")
))

print("stop  discrete  offset")
for i, (a, b) in enumerate(zip(discrete.rssi_log, moved.rssi_log)):
    print(f"{i:4d}  {a.rssi_dbm:8.0f}  {b.rssi_dbm:6.0f}")

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    plt.step(range(19), [r.rssi_dbm for r in discrete.rssi_log], where="mid", label="discrete")
    plt.step(range(19), [r.rssi_dbm for r in moved.rssi_log], where="mid", label="offset")
    plt.xlabel("position index")
    plt.ylabel("RSSI [dBm]")
    plt.legend()
    plt.savefig("rssi_vs_position.png")
    print("wrote rssi_vs_position.png")
