use serde::Serialize;

use crate::error::{Error, Result};

pub const TODO_MARKER: &str = "// TODO: Platform-specific adaptation required";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodeExtraction {
    pub code: String,
    /// 1-based line within `code` and the full line text.
    pub todo_markers: Vec<(usize, String)>,
    pub fence_count: usize,
    pub no_fence: bool,
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Picks the longest fenced block (first on ties); without fences the whole
/// response is the code and `no_fence` is set.
pub fn extract_code(response: &str) -> Result<CodeExtraction> {
    if response.trim().is_empty() {
        return Err(Error::Extraction("empty response".into()));
    }
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut open: Option<Vec<&str>> = None;
    for line in response.lines() {
        match (&mut open, is_fence(line)) {
            (None, true) => open = Some(Vec::new()),
            (Some(_), true) => blocks.push(open.take().unwrap()),
            (Some(block), false) => block.push(line),
            (None, false) => {}
        }
    }
    if let Some(block) = open {
        blocks.push(block);
    }
    let fence_count = blocks.len();
    let (code, no_fence) = if blocks.is_empty() {
        (response.trim_end_matches(['\n', '\r']).to_string(), true)
    } else {
        let joined: Vec<String> = blocks.iter().map(|b| b.join("\n")).collect();
        let mut best = 0;
        for (i, b) in joined.iter().enumerate() {
            if b.chars().count() > joined[best].chars().count() {
                best = i;
            }
        }
        (joined[best].clone(), false)
    };
    let todo_markers = code
        .lines()
        .enumerate()
        .filter(|(_, l)| l.contains(TODO_MARKER))
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect();
    Ok(CodeExtraction {
        code,
        todo_markers,
        fence_count,
        no_fence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_fence() {
        let r = "Here you go:\n```swift\nlet x = 1\n```\nDone.";
        let e = extract_code(r).unwrap();
        assert_eq!(e.code, "let x = 1");
        assert_eq!(e.fence_count, 1);
        assert!(!e.no_fence);
    }

    #[test]
    fn longest_fence_wins_ties_go_first() {
        let short = "a".repeat(40);
        let long = "b".repeat(90);
        let r = format!("```\n{short}\n```\ntext\n```swift\n{long}\n```\n");
        let e = extract_code(&r).unwrap();
        assert_eq!(e.code, long);
        assert_eq!(e.fence_count, 2);

        let r = "```\nfirst\n```\n```\nsecnd\n```";
        assert_eq!(extract_code(r).unwrap().code, "first");
    }

    #[test]
    fn no_fence_flag() {
        let e = extract_code("let y = 2\n").unwrap();
        assert_eq!(e.code, "let y = 2");
        assert!(e.no_fence);
        assert_eq!(e.fence_count, 0);
    }

    #[test]
    fn todo_marker_recorded() {
        let r = "```swift\nfunc f() {\n    // TODO: Platform-specific adaptation required\n}\n```";
        let e = extract_code(r).unwrap();
        assert_eq!(e.todo_markers, [(2, "    // TODO: Platform-specific adaptation required".to_string())]);
    }

    #[test]
    fn empty_response_is_error() {
        assert!(matches!(extract_code("  \n"), Err(Error::Extraction(_))));
    }

    proptest! {
        #[test]
        fn rewrapping_is_idempotent(prose in "[a-z \n]{0,40}", body in "[ -~\n]{1,200}", fenced in any::<bool>()) {
            let response = if fenced { format!("{prose}\n```swift\n{body}\n```\n") } else { format!("{prose}{body}") };
            prop_assume!(!response.trim().is_empty());
            let first = extract_code(&response).unwrap();
            let again = extract_code(&format!("```swift\n{}\n```", first.code)).unwrap();
            prop_assert_eq!(again.code, first.code);
        }
    }
}
