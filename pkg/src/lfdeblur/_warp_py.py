"""Pure numpy warp/blur backend, used when the compiled extension is unavailable.

Arithmetic mirrors ``_warp_ext.pyx`` operation for operation so the two
backends agree bit-for-bit.
"""

import numpy as np

from .lightfield import sample_points


def blur_accumulate(data, pose_terms, focal, baseline, pc, qc):
    """Mean over poses of the warped light field.

    ``pose_terms`` is (N, 7): angular shift (u, v), spatial shift (x, y),
    p_z, cos(psi) - 1 and sin(psi) per pose; see ``blur.pose_terms``.
    """
    U, V, H, W, C = data.shape
    terms = np.asarray(pose_terms, dtype=np.float64)
    n = terms.shape[0]
    cu = (U - 1) / 2.0
    cv = (V - 1) / 2.0
    ys, xs = np.meshgrid(np.arange(H, dtype=np.float64), np.arange(W, dtype=np.float64),
                         indexing="ij")
    out = np.empty(data.shape, dtype=np.float32)
    for u in range(U):
        du = (u - cu) * baseline
        for v in range(V):
            dv = (v - cv) * baseline
            dx = xs - (pc + du)
            dy = ys - (qc + dv)
            acc = np.zeros((H, W, C), dtype=np.float64)
            for ang_u, ang_v, sp_x, sp_y, pz, cm1, sn in terms:
                xj = xs + (dx * cm1 - dy * sn)
                yj = ys + (dx * sn + dy * cm1)
                uu = u + ang_u - (xj - pc) * pz
                vv = v + ang_v - (yj - qc) * pz
                acc += sample_points(data, xj + sp_x, yj + sp_y, uu, vv)
            out[u, v] = acc / n
    return out
