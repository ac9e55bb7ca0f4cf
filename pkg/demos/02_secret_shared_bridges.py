# Bridge addresses split among 10 distributors, three of which lie.

import random

from bridgedist import SharingPolicy, decode_address, encode_address, reconstruct, share
from bridgedist.field import berlekamp_welch_decode, poly_eval

policy = SharingPolicy(10)  # tau = 3
print("threshold tau:", policy.tau, " wrong shares tolerated:", policy.faults)

address = encode_address("203.0.113.9", 9001)
shares = share(address, policy, random.Random(0))

# distributors 2, 5 and 9 send junk
bad = [s if s.index not in (2, 5, 9) else type(s)(s.index, 12345, s.secret_id) for s in shares]
print("recovered:", decode_address(reconstruct(bad, policy)))

# the same decoder on a toy field, by hand
p = 31
points = [(x, poly_eval([5, 2, 3], x, p)) for x in range(1, 8)]
points[3] = (4, 0)
print("decoded polynomial:", berlekamp_welch_decode(points, 2, 2, p).coeffs)
