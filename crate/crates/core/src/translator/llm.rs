use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{LazyLock, Mutex};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{check_height, resolve_position, PromptBundle, RewardParams, TranslatorSource};
use crate::env::Env;
use crate::error::{Error, Result};

pub const LLM_URL_VAR: &str = "LGR2_LLM_URL";
pub const LLM_KEY_VAR: &str = "LGR2_LLM_KEY";

const MAX_ATTEMPTS: u32 = 3;

/// A text-completion backend.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

/// HTTP client posting `{"prompt": ...}` and reading `{"text": ...}`.
/// Requests through one client are serialized.
pub struct HttpLlmClient {
    url: String,
    key: Option<String>,
    agent: ureq::Agent,
    lock: Mutex<()>,
}

impl HttpLlmClient {
    pub fn new(url: impl Into<String>, key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        HttpLlmClient {
            url: url.into(),
            key,
            agent,
            lock: Mutex::new(()),
        }
    }

    /// Reads the endpoint from `LGR2_LLM_URL` and the key from `LGR2_LLM_KEY`.
    pub fn from_env() -> Result<Self> {
        let url = std::env::var(LLM_URL_VAR)
            .map_err(|_| Error::config(format!("{LLM_URL_VAR} is not set")))?;
        Ok(Self::new(url, std::env::var(LLM_KEY_VAR).ok()))
    }

    fn attempt(&self, prompt: &str) -> std::result::Result<String, ureq::Error> {
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(CompletionRequest { prompt })?;
        Ok(resp.body_mut().read_json::<CompletionResponse>()?.text)
    }
}

impl CompletionClient for HttpLlmClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut last = None;
        for attempt in 0..MAX_ATTEMPTS {
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err(e) => last = Some(e),
            }
            if attempt + 1 < MAX_ATTEMPTS {
                std::thread::sleep(Duration::from_millis(250 << attempt));
            }
        }
        Err(Error::Transport(format!(
            "{} failed after {MAX_ATTEMPTS} attempts: {}",
            self.url,
            last.map(|e| e.to_string()).unwrap_or_default()
        )))
    }
}

/// Replays stored responses in order, cycling when exhausted.
pub struct RecordedClient {
    responses: Vec<String>,
    next: AtomicUsize,
}

impl RecordedClient {
    pub fn new(responses: Vec<String>) -> Self {
        RecordedClient {
            responses,
            next: AtomicUsize::new(0),
        }
    }

    /// Answers every prompt with the same text.
    pub fn constant(text: impl Into<String>) -> Self {
        Self::new(vec![text.into()])
    }

    pub fn calls(&self) -> usize {
        self.next.load(Ordering::SeqCst)
    }
}

impl CompletionClient for RecordedClient {
    fn complete(&self, _prompt: &str) -> Result<String> {
        if self.responses.is_empty() {
            return Err(Error::Transport("recorded client has no responses".into()));
        }
        let i = self.next.fetch_add(1, Ordering::SeqCst);
        Ok(self.responses[i % self.responses.len()].clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionCall {
    pub name: String,
    pub args: Vec<f64>,
}

static POS_CALL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"set(?:\\?_)([A-Za-z0-9]+(?:\\?_[A-Za-z0-9]+)*?)\\?_Pos\s*\(([^()]*)\)").unwrap()
});

/// Every `set_*_Pos(...)` call with numeric arguments, in order. Function
/// definitions (`def set_..._Pos(x_pos, ...)`) have non-numeric arguments and
/// are skipped. Markdown-escaped underscores are accepted.
pub fn parse_position_calls(text: &str) -> Vec<PositionCall> {
    POS_CALL
        .captures_iter(text)
        .filter_map(|c| {
            let args: Option<Vec<f64>> = c[2]
                .split(',')
                .map(|a| a.trim().parse::<f64>().ok())
                .collect();
            let args = args?;
            if args.is_empty() {
                return None;
            }
            Some(PositionCall {
                name: c[1].replace("\\_", "_"),
                args,
            })
        })
        .collect()
}

/// Runs the two-stage prompt chain (motion descriptor, then reward coder on
/// its description) and extracts the goal from the last gripper position
/// call in the generated code.
pub fn translate_via_llm(
    client: &dyn CompletionClient,
    bundle: &PromptBundle,
    instruction: &str,
    env: &Env,
) -> Result<RewardParams> {
    let (motion, coder) = super::render_prompts(bundle, instruction, env)?;
    let description = client.complete(&motion)?;
    let code = client.complete(&format!("{coder}\nMotion description:\n{description}\n"))?;
    params_from_response(&code, env)
}

/// Parses and validates a reward-coder response.
pub fn params_from_response(code: &str, env: &Env) -> Result<RewardParams> {
    let fail = |msg: String| Error::Translation {
        msg,
        raw: code.to_string(),
    };
    if code.trim().is_empty() {
        return Err(fail("empty response".into()));
    }
    let calls = parse_position_calls(code);
    let last = calls
        .iter()
        .rev()
        .find(|c| c.name.eq_ignore_ascii_case("gripper") && c.args.len() == 3)
        .ok_or_else(|| fail("no set_Gripper_Pos(x, y, z) call in response".into()))?;
    let [x, y, z] = [last.args[0], last.args[1], last.args[2]];
    if ![x, y, z].iter().all(|v| v.is_finite()) {
        return Err(fail(format!("non-finite position ({x}, {y}, {z})")));
    }
    check_height(z).map_err(|e| fail(e.to_string()))?;
    let goal = resolve_position(env, x, y, Some(z)).map_err(|e| fail(e.to_string()))?;
    let params = RewardParams {
        goal,
        tolerance: env.tolerance(),
        feature_selector: env.kind().feature(),
        env_kind: env.kind(),
        source: TranslatorSource::Llm,
    };
    params.validate(env).map_err(|e| fail(e.to_string()))?;
    Ok(params)
}
