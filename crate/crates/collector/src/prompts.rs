use std::path::Path;

use crate::error::{CollectionError, Result};

pub const PRIOR_FILE: &str = "prior.txt";
pub const POSTERIOR_FILE: &str = "posterior.txt";

/// Prior and posterior elicitation templates. Placeholders are written
/// `{name}`; unknown placeholders are left as they are.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub version: String,
    pub prior: String,
    pub posterior: String,
}

impl PromptSet {
    /// The templates shipped under `prompts/v1`.
    pub fn v1() -> Self {
        Self {
            version: "v1".into(),
            prior: include_str!("../prompts/v1/prior.txt").into(),
            posterior: include_str!("../prompts/v1/posterior.txt").into(),
        }
    }

    /// Loads `prior.txt` and `posterior.txt` from `dir`; the directory name
    /// becomes the version.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| CollectionError::Io { path, source })
        };
        Ok(Self {
            version: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            prior: read(PRIOR_FILE)?,
            posterior: read(POSTERIOR_FILE)?,
        })
    }

    pub fn render_prior(&self, vars: &[(&str, &str)]) -> String {
        render(&self.prior, vars)
    }

    pub fn render_posterior(&self, vars: &[(&str, &str)]) -> String {
        render(&self.posterior, vars)
    }
}

fn render(template: &str, vars: &[(&str, &str)]) -> String {
    vars.iter().fold(template.to_string(), |acc, (k, v)| {
        acc.replace(&format!("{{{k}}}"), v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_templates_fill_every_placeholder() {
        let p = PromptSet::v1();
        let prior = p.render_prior(&[("k", "3"), ("question", "Q?"), ("options", "1. a")]);
        assert!(!prior.contains('{'));
        assert!(prior.contains("Q?"));
        let post = p.render_posterior(&[
            ("k", "3"),
            ("question", "Q?"),
            ("options", "1. a"),
            ("prior", "[0.3]"),
            ("verified", "2"),
            ("strength", "0.9"),
            ("evidence", "[0.9]"),
        ]);
        assert!(!post.contains('{'));
        assert!(post.contains("candidate 2"));
    }

    #[test]
    fn from_dir_reads_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(PRIOR_FILE), "p {k}").unwrap();
        std::fs::write(dir.path().join(POSTERIOR_FILE), "q {k}").unwrap();
        let p = PromptSet::from_dir(dir.path()).unwrap();
        assert_eq!(p.render_prior(&[("k", "4")]), "p 4");
        assert!(PromptSet::from_dir(&dir.path().join("missing")).is_err());
    }
}
