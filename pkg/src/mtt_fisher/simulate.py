"""Synthetic data generation, including the perturbed observation model.

Per frame the draws happen in a fixed order: propagate states, per-target
observations, detection mask, clutter count, clutter points, then the
association permutation on the assembled vector (its domain size is the
realized frame length).  Identical seeds therefore reproduce bit-identical
sequences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .likelihood import MultiTargetState, ObservationFrame
from .models import GroundTruth
from .permassoc import (
    ConstrainedPermutation,
    DetectionMask,
    PerturbationSpec,
    detection_mask_law,
    sample_uniform_constrained,
)


@dataclass(frozen=True)
class SimulatedFrame:
    """Observed frame plus the latents that produced it.

    Estimators never read the ``truth_*`` fields; tests and latent-exact
    score checks do.  ``truth_target_obs`` keeps the observation draw of
    every target, including those removed by the detection mask, so the
    frame can be reassembled exactly from the latents.
    """

    observed: ObservationFrame
    truth_states: MultiTargetState
    truth_mask: DetectionMask
    truth_perm: ConstrainedPermutation
    truth_target_obs: np.ndarray
    truth_clutter: np.ndarray

    @property
    def truth_clutter_count(self) -> int:
        return self.truth_clutter.size

    def reassemble(self) -> np.ndarray:
        """Mask, concatenate clutter, permute; must reproduce ``observed``."""
        kept = self.truth_target_obs[np.asarray(self.truth_mask.bits, dtype=bool)]
        stacked = np.concatenate([kept, self.truth_clutter])
        return stacked[self.truth_perm.as_array()]


def simulate_sequence(
    truth: GroundTruth,
    spec: PerturbationSpec,
    n: int,
    rng: np.random.Generator,
) -> list[SimulatedFrame]:
    """Draw ``n`` frames from the perturbed observation model."""
    if n < 1:
        raise ConfigError(f"need n >= 1 frames, got {n}")
    model = truth.model
    params = model.params
    law = detection_mask_law(params.n_targets, params.detect_prob, spec.beta)
    states = truth.initial_states.copy()
    frames = []
    for _ in range(n):
        if not truth.static:
            states = model.target.sample_transition(states, rng)
        target_obs = np.atleast_1d(
            model.target.sample_obs(states, params.theta, rng, size=states.shape)
        )
        mask = law.sample(rng)
        if params.clutter_rate > 0:
            n_clutter = int(rng.poisson(params.clutter_rate))
            clutter = np.atleast_1d(model.clutter.spatial.sample(rng, n_clutter))
        else:
            clutter = np.empty(0)
        kept = target_obs[np.asarray(mask.bits, dtype=bool)]
        stacked = np.concatenate([kept, clutter])
        perm = sample_uniform_constrained(stacked.size, spec.alpha, rng)
        frames.append(
            SimulatedFrame(
                observed=ObservationFrame(stacked[perm.as_array()]),
                truth_states=MultiTargetState(states.copy()),
                truth_mask=mask,
                truth_perm=perm,
                truth_target_obs=target_obs,
                truth_clutter=clutter,
            )
        )
    return frames


def simulate_static(
    truth: GroundTruth,
    spec: PerturbationSpec,
    n: int,
    rng: np.random.Generator,
) -> list[SimulatedFrame]:
    """As :func:`simulate_sequence` with motion disabled."""
    if not truth.static:
        raise ConfigError("simulate_static requires a static ground truth")
    return simulate_sequence(truth, spec, n, rng)


# ---------------------------------------------------------------------------
# debugging dump (one frame per JSON line)


def frame_to_dict(frame: SimulatedFrame) -> dict:
    return {
        "observed": frame.observed.points.tolist(),
        "truth": {
            "states": frame.truth_states.states.tolist(),
            "mask": list(frame.truth_mask.bits),
            "perm": list(frame.truth_perm.mapping),
            "target_obs": frame.truth_target_obs.tolist(),
            "clutter": frame.truth_clutter.tolist(),
        },
    }


def frame_from_dict(payload: dict) -> SimulatedFrame:
    truth = payload["truth"]
    return SimulatedFrame(
        observed=ObservationFrame(np.asarray(payload["observed"], dtype=float)),
        truth_states=MultiTargetState(np.asarray(truth["states"], dtype=float)),
        truth_mask=DetectionMask(tuple(int(b) for b in truth["mask"])),
        truth_perm=ConstrainedPermutation(tuple(int(i) for i in truth["perm"])),
        truth_target_obs=np.asarray(truth["target_obs"], dtype=float),
        truth_clutter=np.asarray(truth["clutter"], dtype=float),
    )


def dump_frames_jsonl(frames, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(json.dumps(frame_to_dict(frame)) + "\n")


def load_frames_jsonl(path) -> list[SimulatedFrame]:
    with open(path, "r", encoding="utf-8") as fh:
        return [frame_from_dict(json.loads(line)) for line in fh if line.strip()]
