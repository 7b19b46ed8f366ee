//! Builds the call graph and prints the post-order schedule for one method.
//!
//! cargo run --example call_graph_schedule -- [ROOT] [METHOD_ID]

use std::path::PathBuf;

use smartdoc::graph::{build_index, dfs_schedule, graph_from_index, Resolution};
use smartdoc::java::{MethodId, Project, ScanOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let root = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/project"));
    let target: MethodId = args.next().unwrap_or_else(|| "com.acme.shop.Order#checkout/0".into()).parse()?;

    let project = Project::load(root, &ScanOptions::default())?;
    let index = build_index(&project);
    let (graph, resolutions) = graph_from_index(&index);

    for (site, res) in &resolutions {
        let to = match res {
            Resolution::Internal(id) => id.to_string(),
            Resolution::External => "<external>".to_string(),
            Resolution::Ambiguous(c) => format!("<ambiguous: {} candidates>", c.len()),
        };
        println!("{} --{}--> {to}", site.caller, site.callee_name);
    }
    println!("\nback edges:");
    for (caller, callees) in &graph.edges {
        for callee in callees.iter().filter(|c| graph.is_back_edge(caller, c)) {
            println!("  {caller} -> {callee}");
        }
    }

    let schedule = dfs_schedule(&graph, &target, 5)?;
    println!("\nschedule for {target}:");
    for id in &schedule.order {
        println!("  depth {}  {id}", schedule.depth[id]);
    }
    Ok(())
}
