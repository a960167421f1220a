//! Text-generation backends.
//!
//! Two backends sit behind [`Oracle`]: a remote chat-completion endpoint and a
//! seeded synthetic grammar that is a pure function of `(seed, prompt)`.
//! Every call through [`Oracle::generate_with_budget`] debits one unit from the
//! caller's [`Budget`], however many transport retries it takes.

mod prompt;
mod remote;
mod synthetic;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prompt::{render_prompt, render_variant, PromptTemplate, TemplateKind};
pub use synthetic::{synthetic_grammar, HUB_VOCABULARY};

use remote::RemoteBackend;

pub const ENV_ENDPOINT: &str = "LCM_ORACLE_URL";
pub const ENV_API_KEY: &str = "LCM_ORACLE_API_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("topic is empty")]
    EmptyTopic,
    #[error("template references unbound placeholder {{{0}}}")]
    UnboundPlaceholder(String),
    #[error("transport failed after {attempts} attempt(s): {message}")]
    TransportError { attempts: u32, message: String },
    #[error("call budget exhausted")]
    BudgetExceeded,
    #[error("invalid oracle config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    #[default]
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub backend: BackendKind,
    pub endpoint_url: Option<String>,
    pub model_name: String,
    pub seed: u64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retries: u32,
    pub parallelism: usize,
    /// Passed through to the remote endpoint only when set.
    pub temperature: Option<f64>,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Synthetic,
            endpoint_url: None,
            model_name: "synthetic".into(),
            seed: 1,
            max_tokens: 512,
            timeout_secs: 120,
            retries: 3,
            parallelism: 4,
            temperature: None,
            backoff_base_ms: 250,
            backoff_cap_ms: 8_000,
        }
    }
}

impl OracleConfig {
    pub fn synthetic(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.max_tokens == 0 {
            return Err(OracleError::InvalidConfig("max_tokens must be positive".into()));
        }
        if self.parallelism == 0 {
            return Err(OracleError::InvalidConfig("parallelism must be positive".into()));
        }
        if self.backend == BackendKind::Remote && self.resolved_endpoint().is_none() {
            return Err(OracleError::InvalidConfig(format!(
                "remote backend needs endpoint_url or {ENV_ENDPOINT}"
            )));
        }
        Ok(())
    }

    pub(crate) fn resolved_endpoint(&self) -> Option<String> {
        std::env::var(ENV_ENDPOINT)
            .ok()
            .filter(|s| !s.is_empty())
            .or_else(|| self.endpoint_url.clone())
    }

    /// Delay before retry number `attempt` (1-based).
    pub(crate) fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.backoff_base_ms.saturating_mul(factor).min(self.backoff_cap_ms))
    }
}

/// LLM-call budget. Decremented exactly once per generate call.
#[derive(Debug)]
pub struct Budget {
    initial: u64,
    remaining: AtomicU64,
}

impl Budget {
    pub fn new(calls: u64) -> Self {
        Self { initial: calls, remaining: AtomicU64::new(calls) }
    }

    pub fn initial(&self) -> u64 {
        self.initial
    }

    pub fn remaining(&self) -> u64 {
        self.remaining.load(Ordering::SeqCst)
    }

    pub fn spent(&self) -> u64 {
        self.initial - self.remaining()
    }

    pub fn try_spend(&self) -> Result<(), OracleError> {
        self.remaining
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |r| r.checked_sub(1))
            .map(|_| ())
            .map_err(|_| OracleError::BudgetExceeded)
    }
}

type CustomFn = dyn Fn(&str) -> Result<String, OracleError> + Send + Sync;

enum Backend {
    Synthetic { seed: u64 },
    Remote(RemoteBackend),
    Custom(Arc<CustomFn>),
}

pub struct Oracle {
    config: OracleConfig,
    backend: Backend,
    calls: AtomicU64,
}

impl std::fmt::Debug for Oracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Oracle")
            .field("backend", &self.config.backend)
            .field("calls", &self.calls_made())
            .finish()
    }
}

impl Oracle {
    pub fn new(config: OracleConfig) -> Result<Self, OracleError> {
        config.validate()?;
        let backend = match config.backend {
            BackendKind::Synthetic => Backend::Synthetic { seed: config.seed },
            BackendKind::Remote => Backend::Remote(RemoteBackend::new(&config)?),
        };
        Ok(Self { config, backend, calls: AtomicU64::new(0) })
    }

    /// Wraps an arbitrary function as a backend. Handy for fault injection.
    pub fn from_fn<F>(config: OracleConfig, f: F) -> Self
    where
        F: Fn(&str) -> Result<String, OracleError> + Send + Sync + 'static,
    {
        Self { config, backend: Backend::Custom(Arc::new(f)), calls: AtomicU64::new(0) }
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn calls_made(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn generate(&self, prompt: &str) -> Result<String, OracleError> {
        self.generate_with_budget(prompt, None)
    }

    pub fn generate_with_budget(
        &self,
        prompt: &str,
        budget: Option<&Budget>,
    ) -> Result<String, OracleError> {
        if let Some(b) = budget {
            b.try_spend()?;
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.backend {
            Backend::Synthetic { seed } => Ok(synthetic::complete(*seed, prompt)),
            Backend::Remote(r) => r.complete(&self.config, prompt),
            Backend::Custom(f) => f(prompt),
        }
    }

    /// Issues `prompts` with at most `config.parallelism` in flight; results
    /// come back in input order.
    pub fn generate_many(
        &self,
        prompts: &[String],
        budget: Option<&Budget>,
    ) -> Vec<Result<String, OracleError>> {
        use rayon::prelude::*;
        if prompts.len() <= 1 || self.config.parallelism <= 1 {
            return prompts.iter().map(|p| self.generate_with_budget(p, budget)).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.config.parallelism).build() {
            Ok(pool) => pool.install(|| {
                prompts.par_iter().map(|p| self.generate_with_budget(p, budget)).collect()
            }),
            Err(_) => prompts.iter().map(|p| self.generate_with_budget(p, budget)).collect(),
        }
    }
}

/// One-shot generation from a config.
pub fn generate(config: &OracleConfig, prompt: &str) -> Result<String, OracleError> {
    Oracle::new(config.clone())?.generate(prompt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn statements_prompt(topic: &str) -> String {
        let t = PromptTemplate::new(TemplateKind::CausalStatements, "economics");
        render_prompt(&t, topic, "economics", 4).unwrap()
    }

    #[test]
    fn synthetic_is_pure() {
        let p = statements_prompt("Inflation");
        let a = generate(&OracleConfig::synthetic(7), &p).unwrap();
        let b = generate(&OracleConfig::synthetic(7), &p).unwrap();
        assert_eq!(a.as_bytes(), b.as_bytes());
    }

    #[test]
    fn synthetic_seed_changes_output() {
        let p = statements_prompt("Inflation");
        let a = generate(&OracleConfig::synthetic(7), &p).unwrap();
        let b = generate(&OracleConfig::synthetic(8), &p).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn synthetic_reads_topic_and_count_from_prompt() {
        let out = generate(&OracleConfig::synthetic(3), &statements_prompt("Fiscal Policy")).unwrap();
        assert_eq!(out.lines().count(), 4);
        assert_eq!(
            out,
            synthetic_grammar(3, TemplateKind::CausalStatements, "Fiscal Policy", 4).join("\n")
        );
    }

    #[test]
    fn budget_debits_once_per_call() {
        let oracle = Oracle::new(OracleConfig::synthetic(1)).unwrap();
        let budget = Budget::new(2);
        let p = statements_prompt("A");
        oracle.generate_with_budget(&p, Some(&budget)).unwrap();
        oracle.generate_with_budget(&p, Some(&budget)).unwrap();
        assert_eq!(oracle.generate_with_budget(&p, Some(&budget)), Err(OracleError::BudgetExceeded));
        assert_eq!(budget.remaining(), 0);
        assert_eq!(budget.spent(), 2);
        assert_eq!(oracle.calls_made(), 2);
    }

    #[test]
    fn parallel_generation_keeps_order() {
        let mut cfg = OracleConfig::synthetic(5);
        cfg.parallelism = 4;
        let oracle = Oracle::new(cfg).unwrap();
        let prompts: Vec<String> = (0..16).map(|i| statements_prompt(&format!("T{i}"))).collect();
        let out = oracle.generate_many(&prompts, None);
        for (p, r) in prompts.iter().zip(out) {
            assert_eq!(r.unwrap(), oracle.generate(p).unwrap());
        }
    }

    #[test]
    fn remote_requires_endpoint() {
        let cfg = OracleConfig { backend: BackendKind::Remote, ..OracleConfig::default() };
        if std::env::var(ENV_ENDPOINT).is_err() {
            assert!(matches!(Oracle::new(cfg), Err(OracleError::InvalidConfig(_))));
        }
    }

    #[test]
    fn backoff_is_capped() {
        let cfg = OracleConfig { backoff_base_ms: 100, backoff_cap_ms: 1000, ..Default::default() };
        assert_eq!(cfg.backoff(1), Duration::from_millis(100));
        assert_eq!(cfg.backoff(2), Duration::from_millis(200));
        assert_eq!(cfg.backoff(4), Duration::from_millis(800));
        assert_eq!(cfg.backoff(5), Duration::from_millis(1000));
        assert_eq!(cfg.backoff(80), Duration::from_millis(1000));
    }
}
