"""Joint divergences of two random autoregressive policies, computed several ways."""
import numpy as np

from arkl import joint_kl_chain, joint_kl_exact, random_seq_policy, stepwise_squared_hellinger
from arkl.divergences import squared_hellinger_exact, total_variation

rng = np.random.default_rng(0)
d, H = 3, 4
p = random_seq_policy(d, H, rng)
q = random_seq_policy(d, H, rng)

exact = joint_kl_exact(p, q).value
chain = joint_kl_chain(p, q).value
print(f"KL by enumeration  {exact:.15f}")
print(f"KL by chain rule   {chain:.15f}   (gap {abs(exact - chain):.1e})")

hel = squared_hellinger_exact(p, q).value
step = stepwise_squared_hellinger(p, q)
print(f"squared Hellinger  {hel:.6f}")
print(f"stepwise sum       {step:.6f}   ratio {step / hel:.3f}, allowed range [1/7, {H}]")

tv = total_variation(p, q).value
print(f"TV {tv:.6f} <= sqrt(KL/2) = {np.sqrt(exact / 2):.6f}")
