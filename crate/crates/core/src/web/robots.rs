//! Minimal robots.txt: `User-agent`, `Allow` and `Disallow` with
//! longest-prefix matching.

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Robots {
    rules: Vec<(bool, String)>,
}

impl Robots {
    /// Rules of the group naming `agent`, or of the `*` group otherwise.
    pub fn parse(text: &str, agent: &str) -> Self {
        let agent = agent.to_ascii_lowercase();
        let mut specific: Option<Vec<(bool, String)>> = None;
        let mut wildcard: Option<Vec<(bool, String)>> = None;
        let mut current_agents: Vec<String> = Vec::new();
        let mut current_rules: Vec<(bool, String)> = Vec::new();
        let mut in_rules = false;
        let mut flush = |agents: &[String], rules: &[(bool, String)]| {
            for a in agents {
                if a == "*" && wildcard.is_none() {
                    wildcard = Some(rules.to_vec());
                } else if agent.starts_with(a.as_str()) && a != "*" && specific.is_none() {
                    specific = Some(rules.to_vec());
                }
            }
        };
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let Some((key, value)) = line.split_once(':') else { continue };
            let (key, value) = (key.trim().to_ascii_lowercase(), value.trim());
            match key.as_str() {
                "user-agent" => {
                    if in_rules {
                        flush(&current_agents, &current_rules);
                        current_agents.clear();
                        current_rules.clear();
                        in_rules = false;
                    }
                    current_agents.push(value.to_ascii_lowercase());
                }
                "allow" | "disallow" => {
                    in_rules = true;
                    if !value.is_empty() {
                        current_rules.push((key == "allow", value.to_string()));
                    }
                }
                _ => {}
            }
        }
        flush(&current_agents, &current_rules);
        Robots { rules: specific.or(wildcard).unwrap_or_default() }
    }

    pub fn allows(&self, path: &str) -> bool {
        self.rules
            .iter()
            .filter(|(_, prefix)| path.starts_with(prefix.as_str()))
            .max_by_key(|(allow, prefix)| (prefix.len(), *allow))
            .is_none_or(|(allow, _)| *allow)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_and_precedence() {
        let r = Robots::parse("User-agent: *\nDisallow: /private\nAllow: /private/open\n\nUser-agent: other\nDisallow: /", "confmeta");
        assert!(r.allows("/"));
        assert!(!r.allows("/private/x"));
        assert!(r.allows("/private/open/y"));
        let mine = Robots::parse("User-agent: confmeta\nDisallow: /\nUser-agent: *\nDisallow:", "confmeta/0.1");
        assert!(!mine.allows("/index.html"));
        assert!(Robots::parse("", "x").allows("/a"));
    }
}
