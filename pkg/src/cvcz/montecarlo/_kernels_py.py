"""Pure numpy implementation of the shot kernels (fallback backend)."""

import numpy as np

NAME = "numpy"


def propagate(z, offset, inject, prep, post, bell, select, feedforward, out_noise):
    """Push a block of standard-normal draws through one protocol trajectory.

    Per shot (row of ``z``)::

        y = prep @ (offset + inject @ z) + post @ z   # sources -> network -> loss
        t = bell @ y                                   # Bell outcomes
        o = select @ y + feedforward @ t + out_noise @ z

    Returns ``(y, t, o)`` as 2-D arrays with one row per shot.
    """
    y = (offset + z @ inject.T) @ prep.T + z @ post.T
    t = y @ bell.T
    o = y @ select.T + t @ feedforward.T + z @ out_noise.T
    return y, t, o


def moments(series):
    """Column means and the centred comoment matrix (two-pass)."""
    mean = series.mean(axis=0)
    centred = series - mean
    return mean, centred.T @ centred


def shot_statistics(z, weights, bias, gains):
    """Moments of the output quadratures and witness combinations of one block.

    ``weights``/``bias`` give the four outputs per shot as ``bias + weights @ z``
    (the composed trajectory map). Series columns are the outputs followed by
    ``g p_mu - x_nu`` and ``g p_nu - x_mu`` for each gain.
    """
    o = z @ weights.T + bias
    cols = [o]
    for g in gains:
        cols.append((g * o[:, 1] - o[:, 2])[:, None])
        cols.append((g * o[:, 3] - o[:, 0])[:, None])
    return moments(np.hstack(cols))
