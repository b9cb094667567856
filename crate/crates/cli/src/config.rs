use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

/// Flat `key = value` settings; `#` starts a comment line.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
            values.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    /// The flag value if given, else the config value, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| format!("config key {key}: cannot parse '{v}'")),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let c = ConfigFile::parse("# comment\np = 0.3\ntrials=50\nexact-cap = 12\n").unwrap();
        assert_eq!(c.pick::<f64>(None, "p").unwrap(), Some(0.3));
        assert_eq!(c.pick(Some(0.9), "p").unwrap(), Some(0.9));
        assert_eq!(c.pick::<usize>(None, "exact_cap").unwrap(), Some(12));
        assert_eq!(c.pick::<usize>(None, "seed").unwrap(), None);
        assert!(c.pick::<usize>(None, "p").is_err());
        assert!(ConfigFile::parse("novalue").is_err());
    }
}
