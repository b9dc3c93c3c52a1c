//! GraphML writer. Nodes are keyed by token address and carry symbol,
//! weighted degree and the optional centrality and community attributes;
//! edges are undirected with a `weight` attribute. Nodes and edges appear in
//! address order so identical inputs give identical bytes.

use std::fmt::Write;

use crate::centrality::CentralityVector;
use crate::communities::CommunityAssignment;
use crate::error::{Error, Result};
use crate::graph::TokenGraph;
use crate::model::TokenId;

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && !matches!(c, '\t' | '\n' | '\r') => {}
            c => out.push(c),
        }
    }
    out
}

/// Checks that an attribute's token list is exactly the graph's node set.
fn check_cover(g: &TokenGraph, tokens: &[TokenId], what: &str) -> Result<()> {
    if let Some(t) = tokens.iter().find(|t| !g.contains(t)) {
        return Err(Error::AttributeMismatch(format!("{what} covers token {t} absent from the graph")));
    }
    if tokens.len() != g.node_count() {
        let missing = g.nodes().iter().find(|t| !tokens.contains(t)).map(|t| t.to_string()).unwrap_or_default();
        return Err(Error::AttributeMismatch(format!("{what} does not cover graph node {missing}")));
    }
    Ok(())
}

pub fn to_graphml(
    g: &TokenGraph,
    centrality: Option<&CentralityVector>,
    communities: Option<&CommunityAssignment>,
) -> Result<String> {
    if let Some(cv) = centrality {
        check_cover(g, &cv.tokens, "centrality")?;
    }
    if let Some(ca) = communities {
        check_cover(g, &ca.tokens, "community assignment")?;
    }

    let mut doc = String::new();
    doc.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    doc.push_str(
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" \
         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
         xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns \
         http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n",
    );
    doc.push_str("  <key id=\"symbol\" for=\"node\" attr.name=\"symbol\" attr.type=\"string\"/>\n");
    doc.push_str("  <key id=\"weighted_degree\" for=\"node\" attr.name=\"weighted_degree\" attr.type=\"long\"/>\n");
    if centrality.is_some() {
        doc.push_str("  <key id=\"centrality\" for=\"node\" attr.name=\"centrality\" attr.type=\"double\"/>\n");
    }
    if communities.is_some() {
        doc.push_str("  <key id=\"community\" for=\"node\" attr.name=\"community\" attr.type=\"int\"/>\n");
    }
    doc.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"long\"/>\n");
    let _ = writeln!(
        doc,
        "  <graph id=\"{}-{}\" edgedefault=\"undirected\">",
        escape(g.platform().name()),
        g.slice()
    );

    for (i, token) in g.nodes().iter().enumerate() {
        let _ = writeln!(doc, "    <node id=\"{}\">", token.address);
        if let Some(sym) = &token.symbol {
            let _ = writeln!(doc, "      <data key=\"symbol\">{}</data>", escape(sym));
        }
        let _ = writeln!(doc, "      <data key=\"weighted_degree\">{}</data>", g.weighted_degree(i));
        if let Some(score) = centrality.and_then(|cv| cv.score(&token.address)) {
            let _ = writeln!(doc, "      <data key=\"centrality\">{score:?}</data>");
        }
        if let Some(label) = communities.and_then(|ca| ca.label_of(token)) {
            let _ = writeln!(doc, "      <data key=\"community\">{label}</data>");
        }
        doc.push_str("    </node>\n");
    }
    for (k, (i, j, w)) in g.edges().enumerate() {
        let _ = writeln!(
            doc,
            "    <edge id=\"e{k}\" source=\"{}\" target=\"{}\">\n      <data key=\"weight\">{w}</data>\n    </edge>",
            g.node(i).address,
            g.node(j).address
        );
    }
    doc.push_str("  </graph>\n</graphml>\n");
    Ok(doc)
}

/// Restricts a centrality vector to the nodes of `g` (e.g. after degree filtering).
pub fn restrict_centrality(cv: &CentralityVector, g: &TokenGraph) -> CentralityVector {
    let (tokens, scores) = cv.iter().filter(|(t, _)| g.contains(t)).map(|(t, s)| (t.clone(), s)).unzip();
    CentralityVector {
        tokens,
        scores,
        ..cv.clone()
    }
}

/// Restricts a community assignment to the nodes of `g`; labels are kept as is.
pub fn restrict_communities(ca: &CommunityAssignment, g: &TokenGraph) -> CommunityAssignment {
    let (tokens, labels) = ca
        .tokens
        .iter()
        .zip(&ca.labels)
        .filter(|(t, _)| g.contains(t))
        .map(|(t, &l)| (t.clone(), l))
        .unzip();
    CommunityAssignment {
        tokens,
        labels,
        ..ca.clone()
    }
}
