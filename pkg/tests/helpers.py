import numpy as np

from irs_secrecy.model import ChannelSet, PhaseProfile, SystemConfig, TransmitDesign
from oracles import cn


def random_instance(rng, n_t=4, n_i=2, n_e=2, d=2, m=8, p_t=1.0, amplitude=1.0, feasible=True):
    """Unit-scale random system, channels and power-feasible design."""
    cfg = SystemConfig(n_t, n_i, n_e, d, m, p_t, float(rng.uniform(0.05, 1.0)), float(rng.uniform(0.05, 1.0)))
    ch = ChannelSet(cn(rng, m, n_t), cn(rng, n_i, n_t), cn(rng, n_e, n_t), cn(rng, n_i, m), cn(rng, n_e, m))
    v, v_e = cn(rng, n_t, d), cn(rng, n_t, n_t)
    if feasible:
        scale = np.sqrt(p_t * rng.uniform(0.2, 1.0) / (np.linalg.norm(v) ** 2 + np.linalg.norm(v_e) ** 2))
        v, v_e = v * scale, v_e * scale
    phase = PhaseProfile(rng.uniform(0, 2 * np.pi, m), amplitude)
    return cfg, ch, TransmitDesign(v, v_e, phase)
