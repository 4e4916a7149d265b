//! Effective settings: command-line flags override the `--config` file,
//! which overrides built-in defaults. Every resolved value is recorded so it
//! can be echoed into the run manifest.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};
use surfrank::config::KeyValues;
use surfrank::rng::DEFAULT_SEED;

pub const SEED_ENV: &str = "SURFRANK_SEED";

pub struct Settings {
    file: KeyValues,
    effective: KeyValues,
}

impl Settings {
    pub fn load(config: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(path) => KeyValues::read(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => KeyValues::new(),
        };
        Ok(Settings {
            file,
            effective: KeyValues::new(),
        })
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.file
            .get(key)
            .with_context(|| format!("config key {key}"))
    }

    /// Flag, else config file, else `default`.
    pub fn pick<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: impl FnOnce() -> T,
    ) -> Result<T> {
        let value = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or_else(default),
        };
        self.effective.set(key, &value);
        Ok(value)
    }

    /// Like [`Settings::pick`] but the value must come from somewhere.
    pub fn require<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        let value = match flag {
            Some(v) => v,
            None => self
                .file_value(key)?
                .with_context(|| format!("missing --{}", key.replace('_', "-")))?,
        };
        self.effective.set(key, &value);
        Ok(value)
    }

    /// A switch: set by the flag, else by `key=true` in the config file.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool> {
        self.pick(key, flag.then_some(true), || false)
    }

    /// Comma-separated list, flag first.
    pub fn pick_list<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<Vec<T>>,
        default: impl FnOnce() -> Vec<T>,
    ) -> Result<Vec<T>> {
        let value = match flag {
            Some(v) => v,
            None => self
                .file
                .get_list(key)
                .with_context(|| format!("config key {key}"))?
                .unwrap_or_else(default),
        };
        self.effective.set_list(key, &value);
        Ok(value)
    }

    /// Flag, config file, `SURFRANK_SEED`, then the built-in seed.
    pub fn seed(&mut self, flag: Option<u64>) -> Result<u64> {
        let env = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer"))?,
            ),
            Err(_) => None,
        };
        self.pick("seed", flag, || env.unwrap_or(DEFAULT_SEED))
    }

    /// Records a derived or result value in the manifest.
    pub fn record(&mut self, key: &str, value: impl Display) {
        self.effective.set(key, value);
    }

    pub fn manifest(&self, command: &str) -> String {
        format!("# surfrank {command} run\n{}", self.effective.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let dir = std::env::temp_dir().join(format!("surfrank-settings-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "m=64\nhidden=4,4\nnoisy=true\n").unwrap();
        let mut s = Settings::load(Some(&path)).unwrap();
        assert_eq!(s.pick("m", Some(32usize), || 1).unwrap(), 32);
        assert_eq!(s.pick("epochs", None, || 5usize).unwrap(), 5);
        assert_eq!(
            s.pick_list::<usize>("hidden", None, Vec::new).unwrap(),
            vec![4, 4]
        );
        assert!(s.switch("noisy", false).unwrap());
        assert!(s.require::<usize>("budget", None).is_err());
        let m = s.manifest("rank");
        assert!(m.contains("m=32\n") && m.contains("epochs=5\n") && m.contains("hidden=4,4\n"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
