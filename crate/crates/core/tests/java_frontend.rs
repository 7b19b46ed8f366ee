mod common;

use common::*;
use smartdoc::java::{parse_file, Project, ScanOptions, SourceFile};

#[test]
fn fixture_inventory() {
    let project = Project::load(project_dir(), &ScanOptions::default()).unwrap();
    let ids: Vec<String> = project.methods().map(|m| m.id.to_string()).collect();
    assert_eq!(ids.len(), 12);
    let files: Vec<&str> = project.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(
        files,
        [
            "src/main/java/com/acme/shop/Inventory.java",
            "src/main/java/com/acme/shop/Order.java",
            "src/main/java/com/acme/shop/Pricing.java",
        ]
    );
    assert!(project.diagnostics.is_empty(), "{:?}", project.diagnostics);
    let documented: Vec<&str> =
        project.methods().filter(|m| m.doc_comment.is_some()).map(|m| m.id.as_str()).collect();
    assert_eq!(documented.len(), 2);
    assert!(documented.contains(&"com.acme.shop.Order#checkout/0"));
    assert!(documented.contains(&"com.acme.shop.Pricing#subtotal/1"));
}

#[test]
fn constructors_are_not_methods() {
    let project = Project::load(project_dir(), &ScanOptions::default()).unwrap();
    assert!(project.methods().all(|m| m.name != "Order" && m.name != "Inventory"));
}

#[test]
fn spans_point_into_source() {
    let project = Project::load(project_dir(), &ScanOptions::default()).unwrap();
    for m in project.methods() {
        let text = &project.file(&m.file).unwrap().text;
        assert_eq!(&text[m.signature_span.clone()], m.signature_text);
        assert_eq!(&text[m.body_span.clone()], m.body_text);
        assert!(m.body_text.starts_with('{') && m.body_text.ends_with('}'));
        if let (Some(span), Some(doc)) = (&m.doc_span, &m.doc_comment) {
            assert_eq!(&text[span.clone()], doc);
        }
    }
}

#[test]
fn annotations_stay_in_signature() {
    let project = Project::load(project_dir(), &ScanOptions::default()).unwrap();
    let to_string = project.methods().find(|m| m.name == "toString").unwrap();
    assert!(to_string.signature_text.starts_with("@Override"));
    let log = project.methods().find(|m| m.name == "log").unwrap();
    assert!(log.signature_text.starts_with("@Deprecated"));
    assert_eq!(log.param_types, ["String"]);
}

#[test]
fn call_sites_carry_receiver_hints() {
    let project = Project::load(project_dir(), &ScanOptions::default()).unwrap();
    let checkout: Vec<_> = project.calls().filter(|c| c.caller.as_str().ends_with("checkout/0")).collect();
    let names: Vec<&str> = checkout.iter().map(|c| c.callee_name.as_str()).collect();
    assert_eq!(names, ["validate", "total", "applyTax"]);
    assert_eq!(checkout[2].receiver_hint.as_deref(), Some("pricing"));
    assert_eq!(checkout[2].callee_arity, 1);
}

#[test]
fn malformed_file_is_tolerated() {
    let broken = SourceFile::new(
        "Broken.java",
        "package x;\nclass Broken {\n  void ok() { run(); }\n  void bad( { \n",
    );
    let parsed = parse_file(&broken);
    assert!(parsed.methods.iter().any(|m| m.name == "ok"));

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("A.java"), "package p;\nclass A { int f() { return 1; } }\n").unwrap();
    std::fs::write(dir.path().join("B.java"), "package p;\nclass B { int g( {{{ \n").unwrap();
    std::fs::write(dir.path().join("C.java"), [0xffu8, 0xfe, 0x00]).unwrap();
    let project = Project::load(dir.path(), &ScanOptions::default()).unwrap();
    assert_eq!(project.methods().count(), 1);
    assert!(project.diagnostics.iter().any(|d| d.path.ends_with("C.java")));
}

#[test]
fn generated_and_build_dirs_are_excluded() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["src", "target/classes", "build/gen", "src/generated"] {
        std::fs::create_dir_all(dir.path().join(sub)).unwrap();
        std::fs::write(dir.path().join(sub).join("X.java"), "class X { void m() {} }\n").unwrap();
    }
    let project = Project::load(dir.path(), &ScanOptions::default()).unwrap();
    let files: Vec<&str> = project.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(files, ["src/X.java"]);
}

#[test]
fn missing_root_is_an_error() {
    assert!(Project::load("/nonexistent/smartdoc", &ScanOptions::default()).is_err());
}
