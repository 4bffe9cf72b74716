use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use crate::env::{Env, EnvKind, GOAL_HEIGHT, TABLE_CELLS};
use crate::error::{Error, Result};

static SLOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"num_\d+").unwrap());
static CHOICE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"CHOICE:\s*\[([^\]]*)\]").unwrap());
static INT_RULE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"If you see (num_\d+) replace it with an integer within (\d+) and (\d+)").unwrap()
});
static FIXED_RULE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"If you see (num_\d+) replace it with ([0-9.]*[0-9])").unwrap());
static NUMBERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\s*)\d+\.\s").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptRole {
    Motion,
    Coder,
}

impl PromptRole {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptRole::Motion => "motion",
            PromptRole::Coder => "coder",
        }
    }
}

/// Motion-descriptor and reward-coder templates for one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub env_kind: EnvKind,
    pub motion_descriptor: String,
    pub reward_coder: String,
}

#[derive(Debug, Clone, PartialEq)]
enum SlotRule {
    IntRange { lo: i64, hi: i64 },
    Fixed(String),
}

impl PromptBundle {
    /// Templates shipped in `assets/prompts`.
    pub fn builtin(kind: EnvKind) -> Self {
        let (motion, coder) = match kind {
            EnvKind::Maze => (
                include_str!("../../assets/prompts/maze_motion.txt"),
                include_str!("../../assets/prompts/maze_coder.txt"),
            ),
            EnvKind::PickPlace => (
                include_str!("../../assets/prompts/pick_place_motion.txt"),
                include_str!("../../assets/prompts/pick_place_coder.txt"),
            ),
            EnvKind::Bin => (
                include_str!("../../assets/prompts/bin_motion.txt"),
                include_str!("../../assets/prompts/bin_coder.txt"),
            ),
        };
        PromptBundle {
            env_kind: kind,
            motion_descriptor: motion.into(),
            reward_coder: coder.into(),
        }
    }

    pub fn asset_name(kind: EnvKind, role: PromptRole) -> String {
        format!("{}_{}.txt", kind.as_str(), role.as_str())
    }

    /// Loads `<env>_motion.txt` and `<env>_coder.txt` from `dir`.
    pub fn from_dir(dir: &Path, kind: EnvKind) -> Result<Self> {
        let read = |role| {
            let path = dir.join(Self::asset_name(kind, role));
            std::fs::read_to_string(&path)
                .map_err(|e| Error::Template(format!("cannot read {}: {e}", path.display())))
        };
        let bundle = PromptBundle {
            env_kind: kind,
            motion_descriptor: read(PromptRole::Motion)?,
            reward_coder: read(PromptRole::Coder)?,
        };
        bundle.slot_rules()?;
        Ok(bundle)
    }

    pub fn template(&self, role: PromptRole) -> &str {
        match role {
            PromptRole::Motion => &self.motion_descriptor,
            PromptRole::Coder => &self.reward_coder,
        }
    }

    /// Substitution rules declared in the motion template, checked against
    /// the slots its description uses.
    fn slot_rules(&self) -> Result<BTreeMap<String, SlotRule>> {
        let mut rules = BTreeMap::new();
        for line in self.motion_descriptor.lines() {
            if let Some(c) = INT_RULE.captures(line) {
                let lo = c[2]
                    .parse()
                    .map_err(|_| Error::Template(format!("bad rule: {line}")))?;
                let hi = c[3]
                    .parse()
                    .map_err(|_| Error::Template(format!("bad rule: {line}")))?;
                rules.insert(c[1].to_string(), SlotRule::IntRange { lo, hi });
            } else if let Some(c) = FIXED_RULE.captures(line) {
                rules.insert(c[1].to_string(), SlotRule::Fixed(c[2].to_string()));
            }
        }
        let used = self.description_slots();
        for slot in rules.keys() {
            if !used.contains(slot) {
                return Err(Error::Template(format!(
                    "rule for {slot} but no such slot in the template"
                )));
            }
        }
        if self.reward_coder.contains("CHOICE") || SLOT.is_match(&self.reward_coder) {
            return Err(Error::Template(
                "reward coder template must not contain slots".into(),
            ));
        }
        Ok(rules)
    }

    fn description_slots(&self) -> Vec<String> {
        let mut slots: Vec<String> = self
            .motion_descriptor
            .lines()
            .filter(|l| !is_substitution_rule(l))
            .flat_map(|l| {
                SLOT.find_iter(l)
                    .map(|m| m.as_str().to_string())
                    .collect::<Vec<_>>()
            })
            .collect();
        slots.sort();
        slots.dedup();
        slots
    }
}

fn is_substitution_rule(line: &str) -> bool {
    line.contains("If you see")
}

/// Slot values derived from the environment layout.
fn env_slot_values(env: &Env) -> BTreeMap<&'static str, String> {
    let mut v = BTreeMap::new();
    match env.maze() {
        Some(m) => {
            v.insert("num_1", m.width.to_string());
            v.insert("num_2", m.height.to_string());
            v.insert("num_4", "1".to_string());
            v.insert("num_5", (m.width.max(m.height) - 2).to_string());
        }
        None => {
            v.insert("num_1", TABLE_CELLS.to_string());
            v.insert("num_2", TABLE_CELLS.to_string());
            v.insert("num_4", "0.1".to_string());
            v.insert("num_5", "0.9".to_string());
            v.insert("num_6", GOAL_HEIGHT.to_string());
        }
    }
    v
}

/// Resolves every slot and `CHOICE` list in the motion descriptor and drops
/// the substitution rules, which no longer apply once resolved. Returns the
/// motion prompt and the reward-coder prompt, both ending with the instruction.
pub fn render_prompts(
    bundle: &PromptBundle,
    instruction: &str,
    env: &Env,
) -> Result<(String, String)> {
    if bundle.env_kind != env.kind() {
        return Err(Error::Template(format!(
            "prompt bundle is for {} but the env is {}",
            bundle.env_kind,
            env.kind()
        )));
    }
    let rules = bundle.slot_rules()?;
    let env_values = env_slot_values(env);
    let mut values = BTreeMap::new();
    for slot in bundle.description_slots() {
        let from_env = env_values.get(slot.as_str());
        let value = match (rules.get(&slot), from_env) {
            (Some(SlotRule::Fixed(v)), _) => v.clone(),
            (Some(SlotRule::IntRange { lo, hi }), Some(v)) => {
                let n: i64 = v
                    .parse()
                    .map_err(|_| Error::Template(format!("{slot}={v} is not an integer")))?;
                if n < *lo || n > *hi {
                    return Err(Error::Template(format!(
                        "{slot}={n} violates its rule [{lo}, {hi}]"
                    )));
                }
                v.clone()
            }
            (None, Some(v)) => v.clone(),
            (_, None) => {
                return Err(Error::Template(format!(
                    "no rule or layout value for {slot}"
                )));
            }
        };
        values.insert(slot, value);
    }

    let lowered = instruction.to_ascii_lowercase();
    let mut out = Vec::new();
    let mut counter = 0;
    for line in bundle.motion_descriptor.lines() {
        if is_substitution_rule(line) {
            continue;
        }
        let line = SLOT.replace_all(line, |c: &regex::Captures| values[&c[0]].clone());
        let line = CHOICE.replace_all(&line, |c: &regex::Captures| {
            let options: Vec<&str> = c[1]
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            options
                .iter()
                .find(|o| {
                    lowered
                        .split(|ch: char| !ch.is_ascii_alphanumeric())
                        .any(|w| w == o.to_ascii_lowercase())
                })
                .or(options.first())
                .map(|s| s.to_string())
                .unwrap_or_default()
        });
        // Renumber list items so dropped rules leave no gaps.
        let line = match NUMBERED.captures(&line) {
            Some(c) => {
                counter += 1;
                format!("{}{}. {}", &c[1], counter, &line[c[0].len()..])
            }
            None => {
                if !line.trim().is_empty() {
                    counter = 0;
                }
                line.into_owned()
            }
        };
        out.push(line);
    }
    let motion = format!(
        "{}\n\nInstruction: {}\n",
        out.join("\n"),
        instruction.trim()
    );
    if motion.contains("CHOICE:") || SLOT.is_match(&motion) {
        return Err(Error::Template(
            "unexpanded slots remain after rendering".into(),
        ));
    }
    let coder = format!(
        "{}\nInstruction: {}\n",
        bundle.reward_coder,
        instruction.trim()
    );
    Ok((motion, coder))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;

    #[test]
    fn maze_prompt_mentions_table_height() {
        let env = Env::new(&EnvConfig::maze(0)).unwrap();
        let b = PromptBundle::builtin(EnvKind::Maze);
        let (motion, coder) =
            render_prompts(&b, "navigate to the bottom right corner", &env).unwrap();
        assert!(motion.contains("table_height=0.42"));
        assert!(motion.contains("matrix of (10, 10)"));
        assert!(!motion.contains("CHOICE:"));
        assert!(!motion.contains("num_"));
        assert!(coder.contains("set_Gripper_Pos"));
    }

    #[test]
    fn pick_num3_is_fixed() {
        let env = Env::new(&EnvConfig::new(EnvKind::PickPlace)).unwrap();
        let b = PromptBundle::builtin(EnvKind::PickPlace);
        let (motion, _) = render_prompts(&b, "place the apple to (0.3, 0.4)", &env).unwrap();
        assert!(motion.contains("and height (0.42)"), "{motion}");
        assert!(motion.contains("object like apple"), "{motion}");
    }

    #[test]
    fn all_bundles_render_fully() {
        for kind in [EnvKind::Maze, EnvKind::PickPlace, EnvKind::Bin] {
            let env = Env::new(&EnvConfig {
                kind,
                layout_seed: 1,
                maze_width: None,
                maze_height: None,
            })
            .unwrap();
            let (motion, _) =
                render_prompts(&PromptBundle::builtin(kind), "move it", &env).unwrap();
            assert!(!motion.contains("CHOICE"));
            assert!(!SLOT.is_match(&motion));
        }
    }

    #[test]
    fn mismatched_bundle_is_template_error() {
        let env = Env::new(&EnvConfig::new(EnvKind::Bin)).unwrap();
        let err = render_prompts(&PromptBundle::builtin(EnvKind::Maze), "x", &env).unwrap_err();
        assert!(matches!(err, Error::Template(_)));
    }

    #[test]
    fn orphan_rule_is_template_error() {
        let env = Env::new(&EnvConfig::new(EnvKind::PickPlace)).unwrap();
        let mut b = PromptBundle::builtin(EnvKind::PickPlace);
        b.motion_descriptor
            .push_str("\n10. If you see num_9 replace it with 3.\n");
        assert!(matches!(
            render_prompts(&b, "x", &env),
            Err(Error::Template(_))
        ));
    }

    #[test]
    fn slot_without_value_is_template_error() {
        let env = Env::new(&EnvConfig::maze(0)).unwrap();
        let mut b = PromptBundle::builtin(EnvKind::Maze);
        b.motion_descriptor = b
            .motion_descriptor
            .replace("(num_4,num_5)", "(num_4,num_7)");
        assert!(matches!(
            render_prompts(&b, "x", &env),
            Err(Error::Template(_))
        ));
    }
}
