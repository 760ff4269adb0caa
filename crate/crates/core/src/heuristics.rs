//! Rule-based agents.
//!
//! Non-adaptive agents (SleepOnly, Random, Periodic, Burst, Awakening) ignore
//! everything but their own clock and RNG. Adaptive agents (Retaliating,
//! PeriodicCheck, PAC) react to what their own Flips and Checks reveal.
//!
//! Specs have a compact text form used in configs and on the command line:
//!
//! ```text
//! sleep
//! random:p=0.33
//! periodic:phase=4,delay=random
//! burst:phase=8,delay=random,burst=3
//! awake:lambda=0.05
//! reta:phase=4
//! pc:phase=4,delay=2
//! pac:phase=4
//! upac
//! ```
//!
//! Omitted parameters take the defaults: phase 4 (8 for burst), random delay,
//! burst 3, lambda 0.05, p 0.33.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Action, Agent, AgentView, KnowledgeState, Reveal};
use crate::seed::rng_from;

#[derive(Debug, Error, PartialEq)]
pub enum HeuristicError {
    #[error("cannot parse heuristic spec `{spec}`: {reason} (offending token: `{token}`)")]
    Parse { spec: String, token: String, reason: String },
    #[error("invalid heuristic parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Delay {
    Fixed(u32),
    /// Uniform over `0..phase`, redrawn at every reset.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeuristicSpec {
    SleepOnly,
    Random { flip_prob: f64 },
    Periodic { phase: u32, delay: Delay },
    Burst { phase: u32, delay: Delay, burst: u32 },
    Awakening { lambda: f64 },
    Retaliating { phase: u32, delay: Delay },
    PeriodicCheck { phase: u32, delay: Delay },
    Pac { phase: u32, delay: Delay },
}

/// Grammar tokens accepted by [`HeuristicSpec::from_str`], for help output.
pub const SPEC_GRAMMAR: &str = "\
sleep | random:p=<prob> | periodic:phase=<n>,delay=<n|random> | \
burst:phase=<n>,delay=<n|random>,burst=<n> | awake:lambda=<rate> | \
reta:phase=<n>,delay=<n|random> | pc:phase=<n>,delay=<n|random> | \
pac:phase=<n>,delay=<n|random> | upac";

impl HeuristicSpec {
    pub fn periodic(phase: u32) -> Self {
        HeuristicSpec::Periodic { phase, delay: Delay::Random }
    }
    pub fn burst(phase: u32, burst: u32) -> Self {
        HeuristicSpec::Burst { phase, delay: Delay::Random, burst }
    }
    pub fn awakening(lambda: f64) -> Self {
        HeuristicSpec::Awakening { lambda }
    }
    pub fn retaliating(phase: u32) -> Self {
        HeuristicSpec::Retaliating { phase, delay: Delay::Random }
    }
    pub fn periodic_check(phase: u32) -> Self {
        HeuristicSpec::PeriodicCheck { phase, delay: Delay::Random }
    }
    pub fn pac(phase: u32) -> Self {
        HeuristicSpec::Pac { phase, delay: Delay::Random }
    }
    pub fn upac() -> Self {
        HeuristicSpec::Pac { phase: 1, delay: Delay::Fixed(0) }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(
            self,
            HeuristicSpec::Retaliating { .. } | HeuristicSpec::PeriodicCheck { .. } | HeuristicSpec::Pac { .. }
        )
    }

    /// Short label in the style `P(4)`, `B(8,3)`, `Awake(0.05)`.
    pub fn short_name(&self) -> String {
        match *self {
            HeuristicSpec::SleepOnly => "Sleep".into(),
            HeuristicSpec::Random { flip_prob } => format!("Random({flip_prob})"),
            HeuristicSpec::Periodic { phase, .. } => format!("P({phase})"),
            HeuristicSpec::Burst { phase, burst, .. } => format!("B({phase},{burst})"),
            HeuristicSpec::Awakening { lambda } => format!("Awake({lambda})"),
            HeuristicSpec::Retaliating { phase, .. } => format!("Reta({phase})"),
            HeuristicSpec::PeriodicCheck { phase, .. } => format!("PC({phase})"),
            HeuristicSpec::Pac { phase: 1, delay: Delay::Fixed(0) } => "UPAC".into(),
            HeuristicSpec::Pac { phase, .. } => format!("PAC({phase})"),
        }
    }

    pub fn validate(&self) -> Result<(), HeuristicError> {
        let bad = |m: String| Err(HeuristicError::Invalid(m));
        let check_phase = |phase: u32| {
            if phase == 0 {
                return Err(HeuristicError::Invalid("phase must be >= 1".into()));
            }
            Ok(())
        };
        match *self {
            HeuristicSpec::SleepOnly => Ok(()),
            HeuristicSpec::Random { flip_prob } => {
                if !(0.0..=1.0).contains(&flip_prob) {
                    return bad(format!("flip probability must be in [0,1], got {flip_prob}"));
                }
                Ok(())
            }
            HeuristicSpec::Awakening { lambda } => {
                if !(lambda.is_finite() && lambda > 0.0) {
                    return bad(format!("lambda must be finite and > 0, got {lambda}"));
                }
                Ok(())
            }
            HeuristicSpec::Burst { phase, burst, .. } => {
                check_phase(phase)?;
                if burst == 0 {
                    return bad("burst must be >= 1".into());
                }
                if burst > phase {
                    return bad(format!("burst {burst} exceeds phase {phase}"));
                }
                Ok(())
            }
            HeuristicSpec::Periodic { phase, .. }
            | HeuristicSpec::Retaliating { phase, .. }
            | HeuristicSpec::PeriodicCheck { phase, .. }
            | HeuristicSpec::Pac { phase, .. } => check_phase(phase),
        }
    }
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Fixed(d) => write!(f, "{d}"),
            Delay::Random => f.write_str("random"),
        }
    }
}

impl fmt::Display for HeuristicSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            HeuristicSpec::SleepOnly => f.write_str("sleep"),
            HeuristicSpec::Random { flip_prob } => write!(f, "random:p={flip_prob}"),
            HeuristicSpec::Periodic { phase, delay } => write!(f, "periodic:phase={phase},delay={delay}"),
            HeuristicSpec::Burst { phase, delay, burst } => {
                write!(f, "burst:phase={phase},delay={delay},burst={burst}")
            }
            HeuristicSpec::Awakening { lambda } => write!(f, "awake:lambda={lambda}"),
            HeuristicSpec::Retaliating { phase, delay } => write!(f, "reta:phase={phase},delay={delay}"),
            HeuristicSpec::PeriodicCheck { phase, delay } => write!(f, "pc:phase={phase},delay={delay}"),
            HeuristicSpec::Pac { phase, delay } => write!(f, "pac:phase={phase},delay={delay}"),
        }
    }
}

impl FromStr for HeuristicSpec {
    type Err = HeuristicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let spec = s.trim();
        let err = |token: &str, reason: &str| HeuristicError::Parse {
            spec: spec.to_string(),
            token: token.to_string(),
            reason: reason.to_string(),
        };
        let (kind, params) = match spec.split_once(':') {
            Some((k, p)) => (k.trim(), p.trim()),
            None => (spec, ""),
        };
        let allowed: &[&str] = match kind {
            "sleep" | "upac" => &[],
            "random" => &["p"],
            "awake" => &["lambda"],
            "burst" => &["phase", "delay", "burst"],
            "periodic" | "reta" | "pc" | "pac" => &["phase", "delay"],
            _ => return Err(err(kind, "unknown agent kind")),
        };
        let mut phase: Option<u32> = None;
        let mut delay: Option<Delay> = None;
        let mut burst: Option<u32> = None;
        let mut lambda: Option<f64> = None;
        let mut prob: Option<f64> = None;
        for tok in params.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (key, value) = tok.split_once('=').ok_or_else(|| err(tok, "expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            let int = || value.parse::<u32>().map_err(|_| err(tok, "expected a non-negative integer"));
            let float = || value.parse::<f64>().map_err(|_| err(tok, "expected a number"));
            match key {
                "phase" => phase = Some(int()?),
                "burst" => burst = Some(int()?),
                "delay" if value == "random" => delay = Some(Delay::Random),
                "delay" => delay = Some(Delay::Fixed(int()?)),
                "lambda" => lambda = Some(float()?),
                "p" => prob = Some(float()?),
                _ => return Err(err(tok, "unknown parameter")),
            }
        }
        for (name, present) in [
            ("phase", phase.is_some()),
            ("delay", delay.is_some()),
            ("burst", burst.is_some()),
            ("lambda", lambda.is_some()),
            ("p", prob.is_some()),
        ] {
            if present && !allowed.contains(&name) {
                return Err(err(name, "parameter not accepted by this agent kind"));
            }
        }
        let delay = delay.unwrap_or(Delay::Random);
        let out = match kind {
            "sleep" => HeuristicSpec::SleepOnly,
            "upac" => HeuristicSpec::upac(),
            "random" => HeuristicSpec::Random { flip_prob: prob.unwrap_or(0.33) },
            "awake" => HeuristicSpec::Awakening { lambda: lambda.unwrap_or(0.05) },
            "burst" => HeuristicSpec::Burst { phase: phase.unwrap_or(8), delay, burst: burst.unwrap_or(3) },
            "periodic" => HeuristicSpec::Periodic { phase: phase.unwrap_or(4), delay },
            "reta" => HeuristicSpec::Retaliating { phase: phase.unwrap_or(4), delay },
            "pc" => HeuristicSpec::PeriodicCheck { phase: phase.unwrap_or(4), delay },
            "pac" => HeuristicSpec::Pac { phase: phase.unwrap_or(4), delay },
            _ => unreachable!(),
        };
        out.validate().map_err(|e| err(spec, &e.to_string()))?;
        Ok(out)
    }
}

pub fn parse_roster(list: &[String]) -> Result<Vec<HeuristicSpec>, HeuristicError> {
    list.iter().map(|s| s.parse()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Intent {
    Idle,
    Check,
    Flip,
}

/// Per-resource controller state.
#[derive(Debug, Clone)]
enum Controller {
    Sleep,
    Random { p: f64 },
    Periodic { phase: u32, delay: u32 },
    Burst { phase: u32, delay: u32, burst: u32 },
    Awakening { lambda: f64, last_flip: Option<u32> },
    Retaliating { start: u32, min: u32, effective: u32, delay: u32, last_flip: Option<u32> },
    PeriodicCheck { phase: u32, delay: u32, pending: bool, immediate: bool },
}

fn lost_control(me: crate::engine::Player, rev: &Reveal) -> bool {
    rev.owner != me || rev.capture_step == rev.step
}

fn on_schedule(t: u32, phase: u32, delay: u32) -> bool {
    t >= delay && (t - delay).is_multiple_of(phase)
}

impl Controller {
    fn build(spec: &HeuristicSpec, rng: &mut ChaCha8Rng) -> Controller {
        let draw = |d: Delay, phase: u32, rng: &mut ChaCha8Rng| match d {
            Delay::Fixed(d) => d,
            Delay::Random => rng.gen_range(0..phase),
        };
        match *spec {
            HeuristicSpec::SleepOnly => Controller::Sleep,
            HeuristicSpec::Random { flip_prob } => Controller::Random { p: flip_prob },
            HeuristicSpec::Periodic { phase, delay } => {
                Controller::Periodic { phase, delay: draw(delay, phase, rng) }
            }
            HeuristicSpec::Burst { phase, delay, burst } => {
                Controller::Burst { phase, delay: draw(delay, phase, rng), burst }
            }
            HeuristicSpec::Awakening { lambda } => Controller::Awakening { lambda, last_flip: None },
            HeuristicSpec::Retaliating { phase, delay } => Controller::Retaliating {
                start: phase,
                min: (phase / 2).max(1),
                effective: phase,
                delay: draw(delay, phase, rng),
                last_flip: None,
            },
            HeuristicSpec::PeriodicCheck { phase, delay } => Controller::PeriodicCheck {
                phase,
                delay: draw(delay, phase, rng),
                pending: false,
                immediate: false,
            },
            HeuristicSpec::Pac { phase, delay } => Controller::PeriodicCheck {
                phase,
                delay: draw(delay, phase, rng),
                pending: false,
                immediate: true,
            },
        }
    }

    fn propose(&mut self, k: &KnowledgeState, resource: usize, rng: &mut ChaCha8Rng) -> Intent {
        let t = k.now;
        let me = k.player;
        match self {
            Controller::Sleep => Intent::Idle,
            Controller::Random { p } => {
                if rng.gen::<f64>() < *p {
                    Intent::Flip
                } else {
                    Intent::Idle
                }
            }
            Controller::Periodic { phase, delay } => {
                if on_schedule(t, *phase, *delay) {
                    Intent::Flip
                } else {
                    Intent::Idle
                }
            }
            Controller::Burst { phase, delay, burst } => {
                if t < *delay {
                    return Intent::Idle;
                }
                let cycle = *burst + *phase - 1;
                if (t - *delay) % cycle < *burst {
                    Intent::Flip
                } else {
                    Intent::Idle
                }
            }
            Controller::Awakening { lambda, last_flip } => {
                // the counter restarts at 0 on the step after a Flip
                let since = match *last_flip {
                    Some(s) => t - s - 1,
                    None => t,
                };
                let p = awakening_probability(*lambda, since);
                // always consume one draw so the stream is schedule-independent
                if rng.gen::<f64>() < p {
                    Intent::Flip
                } else {
                    Intent::Idle
                }
            }
            Controller::Retaliating { start, min, effective, delay, last_flip } => {
                if let Some(rev) = k.fresh_reveal(resource) {
                    *effective = if lost_control(me, &rev) {
                        (*effective / 2).max(*min)
                    } else {
                        (*effective + 1).min(*start)
                    };
                }
                let due = match *last_flip {
                    None => *delay,
                    Some(s) => s + *effective,
                };
                if t >= due {
                    Intent::Flip
                } else {
                    Intent::Idle
                }
            }
            Controller::PeriodicCheck { phase, delay, pending, immediate } => {
                if let Some(rev) = k.fresh_reveal(resource) {
                    *pending = rev.owner != me;
                }
                if *pending && *immediate {
                    Intent::Flip
                } else if on_schedule(t, *phase, *delay) {
                    if *pending {
                        Intent::Flip
                    } else {
                        Intent::Check
                    }
                } else {
                    Intent::Idle
                }
            }
        }
    }

    fn commit(&mut self, t: u32, intent: Intent) {
        if intent != Intent::Flip {
            return;
        }
        match self {
            Controller::Awakening { last_flip, .. } | Controller::Retaliating { last_flip, .. } => {
                *last_flip = Some(t)
            }
            Controller::PeriodicCheck { pending, .. } => *pending = false,
            _ => {}
        }
    }
}

/// `1 - exp(-lambda * t)`: the Awakening agent's flip probability `t` steps
/// after its last Flip (or after the episode start).
pub fn awakening_probability(lambda: f64, t: u32) -> f64 {
    1.0 - (-lambda * f64::from(t)).exp()
}

/// A heuristic policy instance. One controller per resource; when several
/// want to act on the same step, Flips beat Checks and lower resource indices
/// win. Losing proposals are dropped.
#[derive(Debug, Clone)]
pub struct HeuristicAgent {
    spec: HeuristicSpec,
    seed: u64,
    rng: ChaCha8Rng,
    controllers: Vec<Controller>,
}

impl HeuristicAgent {
    pub fn new(spec: HeuristicSpec, seed: u64) -> Result<Self, HeuristicError> {
        spec.validate()?;
        let mut agent = HeuristicAgent { spec, seed, rng: rng_from(seed), controllers: Vec::new() };
        agent.reset(seed);
        Ok(agent)
    }

    pub fn spec(&self) -> &HeuristicSpec {
        &self.spec
    }

    /// The Retaliating agent's current effective phase on resource 0.
    pub fn effective_phase(&self) -> Option<u32> {
        match self.controllers.first() {
            Some(Controller::Retaliating { effective, .. }) => Some(*effective),
            _ => None,
        }
    }
}

/// Builds a policy instance for `spec`, seeded for its first episode.
pub fn make_heuristic(spec: HeuristicSpec, seed: u64) -> Result<HeuristicAgent, HeuristicError> {
    HeuristicAgent::new(spec, seed)
}

impl Agent for HeuristicAgent {
    fn reset(&mut self, seed: u64) {
        self.seed = seed;
        self.rng = rng_from(seed);
        // resource count is only known once we see a config; start with one
        // controller and grow lazily
        self.controllers.clear();
    }

    fn act(&mut self, view: &AgentView<'_>) -> Action {
        let r = view.config.num_resources;
        while self.controllers.len() < r {
            let c = Controller::build(&self.spec, &mut self.rng);
            self.controllers.push(c);
        }
        let k = view.knowledge;
        let intents: Vec<Intent> = self
            .controllers
            .iter_mut()
            .enumerate()
            .map(|(i, c)| c.propose(k, i, &mut self.rng))
            .collect();
        let chosen = intents
            .iter()
            .position(|&i| i == Intent::Flip)
            .or_else(|| intents.iter().position(|&i| i == Intent::Check));
        match chosen {
            Some(i) => {
                self.controllers[i].commit(k.now, intents[i]);
                match intents[i] {
                    Intent::Flip => Action::Flip(i),
                    _ => Action::Check(i),
                }
            }
            None => Action::Sleep,
        }
    }
}
