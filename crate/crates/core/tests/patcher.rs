mod common;

use common::*;
use proptest::prelude::*;
use smartdoc::java::{parse_file, MethodDecl, SourceFile};
use smartdoc::patch::{apply_patch, apply_patches, format_javadoc, plan_patch, unified_diff};

fn comment_for(m: &MethodDecl) -> String {
    let params: String = (0..m.arity).map(|i| format!(" @param p{i} argument {i}")).collect();
    format!("/** Does the {} work.{params} @return nothing special */", m.name)
}

fn reparse(path: &str, text: &str, m: &MethodDecl) -> MethodDecl {
    parse_file(&SourceFile::new(path, text)).methods.into_iter().find(|x| x.id == m.id).unwrap()
}

#[test]
fn round_trip_every_fixture_method() {
    let ws = open(&project_dir());
    for m in ws.project.methods() {
        let text = &ws.project.file(&m.file).unwrap().text;
        let formatted = format_javadoc(&comment_for(m), &m.indent);
        let patch = plan_patch(m, &formatted, text).unwrap();
        let once = apply_patch(text, &patch).unwrap();

        let after = reparse(&m.file, &once, m);
        assert_eq!(after.doc_comment.as_deref(), Some(formatted.trim_start()), "{}", m.id);
        assert_eq!(after.signature_text, m.signature_text);
        assert_eq!(after.body_text, m.body_text);

        let again = plan_patch(&after, &formatted, &once).unwrap();
        assert_eq!(apply_patch(&once, &again).unwrap(), once, "second application of {} is not a no-op", m.id);

        let diff = unified_diff(&m.file, text, &once);
        assert_eq!(diff.matches("\n@@ ").count() + diff.starts_with("@@ ") as usize, 1, "{diff}");
        let changed: Vec<&str> = diff
            .lines()
            .filter(|l| (l.starts_with('+') || l.starts_with('-')) && !l.starts_with("+++") && !l.starts_with("---"))
            .collect();
        for line in &changed {
            let body = line[1..].trim_start();
            assert!(body.starts_with("/**") || body.starts_with('*'), "{} touched non-comment line {line:?}", m.id);
        }
        let removed = changed.iter().filter(|l| l.starts_with('-')).count();
        // Identical lines such as ` */` may survive as context.
        assert!(removed <= m.doc_comment.as_ref().map_or(0, |d| d.lines().count()), "{}", m.id);
    }
}

#[test]
fn all_patches_in_one_file_compose() {
    let ws = open(&project_dir());
    for file in &ws.project.files {
        let methods: Vec<&MethodDecl> = ws.project.methods().filter(|m| m.file == file.path).collect();
        let patches: Vec<_> = methods
            .iter()
            .map(|m| plan_patch(m, &format_javadoc(&comment_for(m), &m.indent), &file.text).unwrap())
            .collect();
        let patched = apply_patches(&file.text, &patches).unwrap();
        let reparsed = parse_file(&SourceFile::new(file.path.clone(), patched.clone()));
        assert_eq!(reparsed.methods.len(), methods.len());
        assert!(reparsed.methods.iter().all(|m| m.doc_comment.is_some()));
        assert!(reparsed.diagnostics.is_empty());
    }
}

#[test]
fn write_mode_edits_files_on_disk() {
    let dir = copy_fixture(&project_dir());
    let ws = open(dir.path());
    let (engine, _) = mock_engine(&ws);
    let targets = engine.undocumented();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let report = rt.block_on(smartdoc::workspace::generate(&ws, &engine, &targets));
    assert_eq!(report.failures(), 0);
    report.write(&ws).unwrap();
    let again = open(dir.path());
    assert!(again.project.methods().all(|m| m.doc_comment.is_some()));
    // Writing the same report twice fails as stale instead of duplicating comments.
    assert!(report.write(&again).is_err());
}

fn raw_comment() -> impl Strategy<Value = String> {
    let word = "[a-zA-Z][a-zA-Z0-9]{0,8}";
    let line = proptest::collection::vec(word, 1..6).prop_map(|w| w.join(" "));
    let tag = prop_oneof![Just("@param x"), Just("@return"), Just("@throws IOException"), Just("")];
    (proptest::collection::vec((line, tag), 1..5), "[ \t]{0,4}", any::<bool>()).prop_map(|(lines, pad, stars)| {
        let mut out = String::from("/**");
        for (l, t) in lines {
            out.push('\n');
            out.push_str(&pad);
            if stars {
                out.push_str("* ");
            }
            out.push_str(&l);
            if !t.is_empty() {
                out.push(' ');
                out.push_str(t);
                out.push_str(" value");
            }
        }
        out.push_str("\n*/");
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn format_is_idempotent(raw in raw_comment(), indent in "[ ]{0,8}") {
        let once = format_javadoc(&raw, &indent);
        prop_assert_eq!(format_javadoc(&once, &indent), once.clone());
        prop_assert!(once.trim_start().starts_with("/**"));
        prop_assert!(once.ends_with("*/"));
        for line in once.lines().skip(1) {
            prop_assert!(line.starts_with(&format!("{indent} *")), "{:?}", line);
        }
    }
}
