# The max-flow solver on its own: a textbook network, then a tiny
# one-column layer cake where the cut picks the surface height.
import numpy as np

from tomosurf import INF, FlowNetwork, cumulative_profiles, max_flow
from tomosurf.segmentation import penalty_curve

# source 0, sink 5
net = FlowNetwork(6, source=0, sink=5)
for a, b, c in [(0, 1, 16), (0, 2, 13), (1, 2, 10), (2, 1, 4), (1, 3, 12),
                (3, 2, 9), (2, 4, 14), (4, 3, 7), (3, 5, 20), (4, 5, 4)]:
    net.add_arc(a, b, c)
cut = max_flow(net)
print("max flow:", cut.flow)
print("source side:", np.flatnonzero(cut.source_side))

# one ray with a bright sample at index 3
ray = np.array([0.1, 0.0, 0.2, 2.0, 0.1, 0.0])
prof = cumulative_profiles(ray)
print("C- :", prof.before.round(2))
print("C+ :", prof.after.round(2))
print("penalty per cut height:", penalty_curve(prof).round(2))

# same thing as a graph. Samples run away from the sensor, so the
# interior is the tail of the ray: INF arcs i -> i+1 keep it contiguous.
n = ray.size
g = FlowNetwork(n + 2, source=n, sink=n + 1)
for i in range(n):
    g.add_arc(n, i, prof.air_cost[i])
    g.add_arc(i, n + 1, prof.interior_cost[i])
    if i + 1 < n:
        g.add_arc(i, i + 1, INF)
g.add_arc(n, n - 1, INF)
c = max_flow(g)
print("surface sample from the cut:", int(np.argmax(c.source_side[:n])), " cost:", c.flow)
