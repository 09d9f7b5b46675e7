use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::positioning::{Direction, DistanceBand, PositioningDecision};
use crate::reasoning::{Backend, ReasoningError, ReasoningRequest, ReasoningResponse};

/// Every valid (direction, distance) pair.
const VERDICTS: [(Direction, DistanceBand); 10] = [
    (Direction::Left, DistanceBand::TooFar),
    (Direction::Left, DistanceBand::TooClose),
    (Direction::Left, DistanceBand::Appropriate),
    (Direction::Right, DistanceBand::TooFar),
    (Direction::Right, DistanceBand::TooClose),
    (Direction::Right, DistanceBand::Appropriate),
    (Direction::Center, DistanceBand::TooFar),
    (Direction::Center, DistanceBand::TooClose),
    (Direction::Center, DistanceBand::Appropriate),
    (Direction::NotVisible, DistanceBand::NotVisible),
];

/// Wraps another backend and, with probability `p`, replaces a positioning
/// verdict by a uniformly chosen different one. Seeded, so flips repeat.
pub struct NoiseBackend {
    inner: Box<dyn Backend>,
    p: f64,
    rng: ChaCha8Rng,
    flips: u64,
}

impl NoiseBackend {
    pub fn new(inner: Box<dyn Backend>, p: f64, seed: u64) -> Self {
        Self { inner, p: p.clamp(0.0, 1.0), rng: ChaCha8Rng::seed_from_u64(seed), flips: 0 }
    }

    pub fn flips(&self) -> u64 {
        self.flips
    }
}

impl Backend for NoiseBackend {
    fn name(&self) -> &'static str {
        "noise"
    }

    fn respond(&mut self, req: &ReasoningRequest) -> Result<ReasoningResponse, ReasoningError> {
        let resp = self.inner.respond(req)?;
        let ReasoningResponse::PosDecide(d) = resp else {
            return Ok(resp);
        };
        if !self.rng.gen_bool(self.p) {
            return Ok(ReasoningResponse::PosDecide(d));
        }
        self.flips += 1;
        let others: Vec<_> = VERDICTS.iter().filter(|v| **v != (d.direction, d.distance)).collect();
        let &(direction, distance) = *others.choose(&mut self.rng).expect("nine alternatives");
        Ok(ReasoningResponse::PosDecide(PositioningDecision::new(
            direction,
            distance,
            format!("{} (perturbed)", d.reasoning),
        )))
    }
}
