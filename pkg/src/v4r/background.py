"""Per-pixel adaptive Gaussian-mixture background subtraction.

Each pixel carries a small mixture of Gaussians over luma. Applying a frame
classifies every pixel as background (0) or moving foreground (1) against the
mixture state *before* the frame is absorbed, then updates the state. The
update is an online recursive mixture estimate with a complexity prior that
prunes components whose support vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from sklearn.base import BaseEstimator

from .errors import DimensionMismatch, InvalidParams
from .validation import check_binary, check_gray

__all__ = [
    "MogParams",
    "BackgroundSubtractor",
    "foreground_ratio",
    "is_foreground_frame",
]

_PRUNE_WEIGHT = 1e-6


@dataclass(frozen=True)
class MogParams:
    """Knobs of the mixture background model.

    ``match_threshold_sq`` is a squared normalized distance: a sample x
    matches a component when (x - mean)^2 / variance falls below it.
    ``background_mass`` is the cumulative weight that defines the background
    component set. The first ``warmup_frames`` frames of a scene produce
    segmentation maps but are excluded from frame classification.
    """

    max_components: int = 5
    match_threshold_sq: float = 16.0
    learning_rate: float = 0.005
    complexity_prior: float = 0.05
    initial_variance: float = 225.0
    variance_min: float = 4.0
    variance_max: float = 5000.0
    background_mass: float = 0.9
    warmup_frames: int = 20

    def validate(self) -> "MogParams":
        if self.max_components < 1:
            raise InvalidParams("max_components must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise InvalidParams("learning_rate must be in (0, 1]")
        if not 0.0 < self.background_mass < 1.0:
            raise InvalidParams("background_mass must be in (0, 1)")
        if self.match_threshold_sq <= 0.0:
            raise InvalidParams("match_threshold_sq must be > 0")
        if self.complexity_prior < 0.0:
            raise InvalidParams("complexity_prior must be >= 0")
        if not self.variance_min < self.initial_variance <= self.variance_max:
            raise InvalidParams("need variance_min < initial_variance <= variance_max")
        if self.variance_min <= 0.0:
            raise InvalidParams("variance_min must be > 0")
        if self.warmup_frames < 0:
            raise InvalidParams("warmup_frames must be >= 0")
        return self

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class BackgroundSubtractor(BaseEstimator):
    """Online mixture-of-Gaussians background model over gray frames.

    Sklearn-style estimator: constructor arguments mirror
    :class:`MogParams` and are stored verbatim, so ``get_params`` /
    ``set_params`` work as usual. State arrays (``weights_``, ``means_``,
    ``variances_``, ``n_components_``, ``frames_seen_``) appear after the
    first :meth:`apply` call.

    ``apply`` is order-dependent and must be called sequentially over one
    scene's frames; distinct instances are independent and may run in
    parallel. Its per-pixel arithmetic is fully vectorized, so the output is
    identical regardless of how callers schedule scenes across threads.
    """

    def __init__(
        self,
        max_components: int = 5,
        match_threshold_sq: float = 16.0,
        learning_rate: float = 0.005,
        complexity_prior: float = 0.05,
        initial_variance: float = 225.0,
        variance_min: float = 4.0,
        variance_max: float = 5000.0,
        background_mass: float = 0.9,
        warmup_frames: int = 20,
    ):
        self.max_components = max_components
        self.match_threshold_sq = match_threshold_sq
        self.learning_rate = learning_rate
        self.complexity_prior = complexity_prior
        self.initial_variance = initial_variance
        self.variance_min = variance_min
        self.variance_max = variance_max
        self.background_mass = background_mass
        self.warmup_frames = warmup_frames

    @classmethod
    def from_params(cls, params: MogParams) -> "BackgroundSubtractor":
        return cls(**params.as_dict())

    def mog_params(self) -> MogParams:
        return MogParams(**{f.name: getattr(self, f.name) for f in fields(MogParams)})

    def initialize(self, height: int, width: int) -> "BackgroundSubtractor":
        """Allocate empty per-pixel mixtures for a ``height x width`` grid."""
        if height < 1 or width < 1:
            raise InvalidParams("grid dimensions must be >= 1")
        self.mog_params().validate()
        k = self.max_components
        self.weights_ = np.zeros((k, height, width))
        self.means_ = np.zeros((k, height, width))
        self.variances_ = np.zeros((k, height, width))
        self.n_components_ = np.zeros((height, width), dtype=np.int64)
        self.frames_seen_ = 0
        return self

    def fit(self, frames, y=None) -> "BackgroundSubtractor":
        """Absorb an iterable of gray frames in order. Returns self."""
        for frame in frames:
            self.apply(frame)
        return self

    def apply(self, frame: np.ndarray) -> np.ndarray:
        """Classify and absorb one gray frame; returns a {0, 1} segmentation map.

        Per pixel with sample x:
          1. empty mixture: create (weight 1, mean x, initial variance), background;
          2. match = first component, in descending-weight order, with
             (x - mean)^2 / variance < match_threshold_sq;
          3. weights <- w + lr*(o - w) - lr*prior*w (o = 1 only for the match),
             prune weights <= 1e-6, renormalize;
          4. matched component: rho = min(1, lr / w), mean += rho*(x - mean),
             variance <- clamp(variance + rho*((x - mean_new)^2 - variance));
          5. no match: insert (lr, x, initial variance) in a free slot, or
             replace the smallest-weight component, then renormalize;
          6. background iff the matched component (pre-update state) is inside
             the smallest descending-(w/sigma) prefix whose cumulative weight
             exceeds background_mass; foreground when there is no match.
        """
        g = check_gray(frame)
        if not hasattr(self, "weights_"):
            self.initialize(*g.shape)
        if g.shape != self.n_components_.shape:
            raise DimensionMismatch(
                f"frame shape {g.shape} does not match model grid {self.n_components_.shape}"
            )

        x = g.astype(np.float64)
        k = self.max_components
        lr = float(self.learning_rate)
        prior = float(self.complexity_prior)
        w, mu, var, n = self.weights_, self.means_, self.variances_, self.n_components_

        kidx = np.arange(k)[:, None, None]
        active = kidx < n[None]
        empty = n == 0

        # Step 2: match against the pre-update state.
        safe_var = np.where(active, var, 1.0)
        dist_sq = (x[None] - mu) ** 2 / safe_var
        candidate = active & (dist_sq < self.match_threshold_sq)
        by_weight = np.argsort(-w, axis=0, kind="stable")
        cand_sorted = np.take_along_axis(candidate, by_weight, axis=0)
        first_pos = np.argmax(cand_sorted, axis=0)
        has_match = np.take_along_axis(cand_sorted, first_pos[None], axis=0)[0]
        matched_idx = np.take_along_axis(by_weight, first_pos[None], axis=0)[0]

        # Step 6: background decision, also on the pre-update state.
        rank_key = np.where(active, w / np.sqrt(safe_var), -np.inf)
        by_fitness = np.argsort(-rank_key, axis=0, kind="stable")
        w_sorted = np.take_along_axis(np.where(active, w, 0.0), by_fitness, axis=0)
        cum = np.cumsum(w_sorted, axis=0)
        cum_before = np.concatenate([np.zeros((1,) + cum.shape[1:]), cum[:-1]], axis=0)
        in_prefix = cum_before <= self.background_mass
        matched_pos = np.argmax(by_fitness == matched_idx[None], axis=0)
        matched_bg = np.take_along_axis(in_prefix, matched_pos[None], axis=0)[0]
        seg = np.where(has_match & matched_bg, 0, 1).astype(np.uint8)
        seg[empty] = 0

        # Step 3: weight update, prune, renormalize.
        owner = (kidx == matched_idx[None]) & has_match[None] & active
        w_new = w + lr * (owner.astype(np.float64) - w) - lr * prior * w
        keep = active & (w_new > _PRUNE_WEIGHT)
        w_new = np.where(keep, w_new, 0.0)
        total = w_new.sum(axis=0)
        w_new = w_new / np.where(total > 0.0, total, 1.0)

        # Step 4: matched-component mean/variance update (post-renormalization
        # weight drives the effective per-component rate).
        w_m = np.take_along_axis(w_new, matched_idx[None], axis=0)[0]
        mu_m = np.take_along_axis(mu, matched_idx[None], axis=0)[0]
        var_m = np.take_along_axis(var, matched_idx[None], axis=0)[0]
        matched_kept = has_match & np.take_along_axis(keep, matched_idx[None], axis=0)[0]
        rho = np.minimum(1.0, lr / np.where(w_m > 0.0, w_m, 1.0))
        mu_upd = mu_m + rho * (x - mu_m)
        var_upd = var_m + rho * ((x - mu_upd) ** 2 - var_m)
        var_upd = np.clip(var_upd, self.variance_min, self.variance_max)
        mu_write = np.where(matched_kept, mu_upd, mu_m)
        var_write = np.where(matched_kept, var_upd, var_m)
        np.put_along_axis(mu, matched_idx[None], mu_write[None], axis=0)
        np.put_along_axis(var, matched_idx[None], var_write[None], axis=0)

        # Compact survivors to the front, preserving their relative order.
        pack = np.argsort(~keep, axis=0, kind="stable")
        w2 = np.take_along_axis(w_new, pack, axis=0)
        mu2 = np.take_along_axis(mu, pack, axis=0)
        var2 = np.take_along_axis(var, pack, axis=0)
        n2 = keep.sum(axis=0)

        # Step 5: unmatched pixels gain a fresh component.
        nomatch = ~has_match & ~empty
        room = nomatch & (n2 < k)
        w_for_min = np.where(kidx < n2[None], w2, np.inf)
        slot = np.where(room, np.minimum(n2, k - 1), np.argmin(w_for_min, axis=0))
        cur_w = np.take_along_axis(w2, slot[None], axis=0)[0]
        cur_mu = np.take_along_axis(mu2, slot[None], axis=0)[0]
        cur_var = np.take_along_axis(var2, slot[None], axis=0)[0]
        np.put_along_axis(w2, slot[None], np.where(nomatch, lr, cur_w)[None], axis=0)
        np.put_along_axis(mu2, slot[None], np.where(nomatch, x, cur_mu)[None], axis=0)
        np.put_along_axis(
            var2, slot[None], np.where(nomatch, self.initial_variance, cur_var)[None], axis=0
        )
        n2 = np.where(room, n2 + 1, n2)
        total2 = w2.sum(axis=0)
        w2 = w2 / np.where(nomatch, total2, 1.0)

        # Step 1: first sample ever observed at a pixel.
        if empty.any():
            w2[0][empty] = 1.0
            mu2[0][empty] = x[empty]
            var2[0][empty] = self.initial_variance
            n2 = np.where(empty, 1, n2)

        self.weights_, self.means_, self.variances_ = w2, mu2, var2
        self.n_components_ = n2
        self.frames_seen_ += 1
        return seg


def foreground_ratio(seg_map: np.ndarray) -> float:
    """Fraction of pixels marked foreground in a segmentation map."""
    m = check_binary(seg_map)
    return float(m.sum()) / m.size


def is_foreground_frame(ratio: float, delta: float) -> bool:
    """A frame is foreground iff its foreground ratio strictly exceeds delta."""
    if not 0.0 <= ratio <= 1.0:
        raise InvalidParams(f"ratio must be in [0, 1], got {ratio}")
    if not 0.0 <= delta <= 1.0:
        raise InvalidParams(f"delta must be in [0, 1], got {delta}")
    return ratio > delta
