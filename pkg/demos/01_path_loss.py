"""
Free-space path loss and RSSI quantization
==========================================

How far apart can two nodes be before the -110 dBm cutoff hides them?
"""

import numpy as np

from wsnsim.medium import PropagationModel, attenuation_db, received_power_dbm
from wsnsim.phy import quantize_rssi

model = PropagationModel()
print("effective antenna area:", model.effective_area_m2, "m^2")

# attenuation at a few distances
for d in (1, 10, 50, 100):
    print(f"{d:>5} m  {attenuation_db(d):8.3f} dB")

# RSSI as the receiver moves away from a 1 dBm transmitter
d = np.linspace(1, 150, 8)
p = [received_power_dbm(1.0, (0, 0), (x, 0)) for x in d]
for x, pw in zip(d, p):
    print(f"{x:7.2f} m  {pw:8.3f} dBm  -> RSSI {quantize_rssi(pw):.0f}")

# free space: the loss grows by 20 dB per decade, so the cutoff is far away
reach = 10 ** ((1 + 110 - attenuation_db(1)) / 20)
print(f"distance where the received power hits -110 dBm: {reach:,.0f} m")
