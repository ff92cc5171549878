//! TOML run configuration: one table per subcommand, e.g. `[abahc.jeff]`, plus an
//! optional `[defaults]` table read by every subcommand. Command-line flags win.

use std::path::Path;

use anyhow::Result;
use serde::de::DeserializeOwned;
use toml::Table;

use crate::usage;

#[derive(Clone, Debug, Default)]
pub struct Config {
    root: Table,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("reading config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| usage(format!("parsing config {}: {e:#}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(Self { root: text.parse()? })
    }

    /// Lookup scoped to `group.command`, falling back to `[defaults]`.
    pub fn scope(&self, group: &str, command: &str) -> Scope<'_> {
        let table = self.root.get(group).and_then(|g| g.as_table()).and_then(|g| g.get(command)).and_then(|c| c.as_table());
        let defaults = self.root.get("defaults").and_then(|d| d.as_table());
        Scope { table, defaults }
    }
}

pub struct Scope<'a> {
    table: Option<&'a Table>,
    defaults: Option<&'a Table>,
}

impl Scope<'_> {
    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        let v = self
            .table
            .and_then(|t| t.get(key))
            .or_else(|| self.defaults.and_then(|t| t.get(key)));
        match v {
            Some(v) => Ok(Some(v.clone().try_into().map_err(|e| usage(format!("config key `{key}`: {e}")))?)),
            None => Ok(None),
        }
    }

    /// Flag value if given, else the config value, else `default`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    pub fn pick_opt<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        Ok(match flag {
            Some(v) => Some(v),
            None => self.get(key)?,
        })
    }
}
