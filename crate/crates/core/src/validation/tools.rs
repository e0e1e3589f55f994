use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

pub const FILE_PLACEHOLDER: &str = "{file}";

/// A shell-quoted command line with a `{file}` placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandTemplate {
    raw: String,
    args: Vec<String>,
}

impl CommandTemplate {
    pub fn parse(raw: &str) -> Result<Self> {
        let args = shlex::split(raw).ok_or_else(|| Error::Config(format!("cannot parse command `{raw}`")))?;
        if args.is_empty() {
            return Err(Error::Config("empty command template".into()));
        }
        if !args.iter().any(|a| a.contains(FILE_PLACEHOLDER)) {
            return Err(Error::Config(format!("command `{raw}` lacks the {FILE_PLACEHOLDER} placeholder")));
        }
        Ok(Self {
            raw: raw.to_string(),
            args,
        })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn argv(&self, file: &str) -> Vec<String> {
        self.args.iter().map(|a| a.replace(FILE_PLACEHOLDER, file)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolOutput {
    /// `None` when the process was ended by a signal.
    pub status: Option<i32>,
    pub stdout: String,
    pub stderr: String,
}

impl ToolOutput {
    pub fn combined(&self) -> String {
        format!("{}\n{}", self.stdout, self.stderr)
    }
}

/// Runs the tool on `file`. A nonzero exit is returned, not raised.
pub fn run_external_check(file: &Path, template: &CommandTemplate, timeout: Duration) -> Result<ToolOutput> {
    let argv = template.argv(&file.to_string_lossy());
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config(format!("tool `{}` not found (command `{}`)", argv[0], template.raw())),
            _ => Error::Tool(format!("cannot start `{}`: {e}", argv[0])),
        })?;
    let drain = |mut r: Box<dyn Read + Send>| {
        std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = r.read_to_end(&mut buf);
            String::from_utf8_lossy(&buf).into_owned()
        })
    };
    let out = drain(Box::new(child.stdout.take().expect("piped")));
    let err = drain(Box::new(child.stderr.take().expect("piped")));
    let started = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait().map_err(|e| Error::Tool(e.to_string()))? {
            break status;
        }
        if started.elapsed() > timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::Tool(format!("`{}` timed out after {:?}", template.raw(), timeout)));
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    Ok(ToolOutput {
        status: status.code(),
        stdout: out.join().unwrap_or_default(),
        stderr: err.join().unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution() {
        let t = CommandTemplate::parse("swiftc -parse {file}").unwrap();
        assert_eq!(t.argv("a.swift"), ["swiftc", "-parse", "a.swift"]);
        let t = CommandTemplate::parse("swiftlint lint --path '{file}' --quiet").unwrap();
        assert_eq!(t.argv("dir with space/b.swift"), ["swiftlint", "lint", "--path", "dir with space/b.swift", "--quiet"]);
    }

    #[test]
    fn template_errors() {
        assert!(CommandTemplate::parse("swiftc -parse").is_err());
        assert!(CommandTemplate::parse("").is_err());
        assert!(CommandTemplate::parse("sh -c 'unclosed {file}").is_err());
    }

    #[test]
    fn missing_tool_is_config_error() {
        let t = CommandTemplate::parse("definitely-not-a-real-tool-xyz {file}").unwrap();
        let err = run_external_check(Path::new("a.swift"), &t, Duration::from_secs(5)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[cfg(unix)]
    #[test]
    fn nonzero_exit_is_an_outcome_and_timeouts_fail() {
        let t = CommandTemplate::parse("sh -c 'echo \"$0:3:1: error: boom\"; exit 1' {file}").unwrap();
        let out = run_external_check(Path::new("x.swift"), &t, Duration::from_secs(5)).unwrap();
        assert_eq!(out.status, Some(1));
        assert_eq!(out.stdout.trim(), "x.swift:3:1: error: boom");

        let slow = CommandTemplate::parse("sh -c 'sleep 5' {file}").unwrap();
        let err = run_external_check(Path::new("x.swift"), &slow, Duration::from_millis(100)).unwrap_err();
        assert!(matches!(err, Error::Tool(_)));
    }
}
