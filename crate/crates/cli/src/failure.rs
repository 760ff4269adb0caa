//! Exit-code classification: bad input is a config error (2), anything
//! that goes wrong while running is a runtime error (1).

use std::fmt;

use poolflip::engine::EngineError;
use poolflip::harness::HarnessError;
use poolflip::learner::LearnerError;
use poolflip::metagame::MetagameError;

#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn config(msg: impl fmt::Display) -> Self {
        Failure::Config(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Runtime(e) => e,
        }
    }

    fn map(self, f: impl FnOnce(anyhow::Error) -> anyhow::Error) -> Self {
        match self {
            Failure::Config(e) => Failure::Config(f(e)),
            Failure::Runtime(e) => Failure::Runtime(f(e)),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub trait Context<T> {
    /// Prefixes the error, keeping its classification.
    fn context(self, msg: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<Failure>> Context<T> for Result<T, E> {
    fn context(self, msg: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| e.into().map(|inner| inner.context(msg.to_string())))
    }
}

fn learner_is_config(e: &LearnerError) -> bool {
    matches!(
        e,
        LearnerError::Config(_)
            | LearnerError::Shape(_)
            | LearnerError::Checkpoint(_)
            | LearnerError::Version { .. }
            | LearnerError::Truncated { .. }
            | LearnerError::Incompatible { .. }
            | LearnerError::Json(_)
            | LearnerError::Engine(EngineError::InvalidConfig(_))
    )
}

fn metagame_is_config(e: &MetagameError) -> bool {
    match e {
        MetagameError::Pool(_) | MetagameError::Objective(_) | MetagameError::Config(_) => true,
        MetagameError::Evaluation { source, .. } | MetagameError::Iteration { source, .. } => learner_is_config(source),
        MetagameError::Learner(l) => learner_is_config(l),
    }
}

fn harness_is_config(e: &HarnessError) -> bool {
    match e {
        HarnessError::Specs(_) | HarnessError::Config(_) | HarnessError::EmptySample | HarnessError::Table(_) => true,
        HarnessError::Learner(l) => learner_is_config(l),
        HarnessError::Metagame(m) => metagame_is_config(m),
        HarnessError::Io(_) | HarnessError::Csv(_) | HarnessError::Json(_) => false,
    }
}

fn classify<E: std::error::Error + Send + Sync + 'static>(e: E, config: bool) -> Failure {
    if config {
        Failure::Config(e.into())
    } else {
        Failure::Runtime(e.into())
    }
}

impl From<LearnerError> for Failure {
    fn from(e: LearnerError) -> Self {
        let c = learner_is_config(&e);
        classify(e, c)
    }
}

impl From<MetagameError> for Failure {
    fn from(e: MetagameError) -> Self {
        let c = metagame_is_config(&e);
        classify(e, c)
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let c = harness_is_config(&e);
        classify(e, c)
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let c = matches!(e, EngineError::InvalidConfig(_));
        classify(e, c)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<Failure> for anyhow::Error {
    fn from(f: Failure) -> Self {
        match f {
            Failure::Config(e) | Failure::Runtime(e) => e,
        }
    }
}
