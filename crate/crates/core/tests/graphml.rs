use std::collections::{HashMap, HashSet};

use blocktext::export::IndustryGraph;

const NS: &str = "http://graphml.graphdrawing.org/xmlns";

/// Checks the structural rules of the GraphML schema that the export relies
/// on: namespace, element order, key declarations, id uniqueness and
/// references, and typed data values.
fn validate(xml: &str) -> Result<(), String> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| e.to_string())?;
    let root = doc.root_element();
    if root.tag_name().name() != "graphml" || root.tag_name().namespace() != Some(NS) {
        return Err("root must be graphml in the GraphML namespace".into());
    }
    let children: Vec<_> = root.children().filter(|n| n.is_element()).collect();
    let mut keys: HashMap<String, (String, String)> = HashMap::new();
    let mut seen_graph = false;
    for child in &children {
        if child.tag_name().namespace() != Some(NS) {
            return Err(format!("foreign element {:?}", child.tag_name().name()));
        }
        match child.tag_name().name() {
            "key" => {
                if seen_graph {
                    return Err("key after graph".into());
                }
                let id = child.attribute("id").ok_or("key without id")?;
                let domain = child.attribute("for").unwrap_or("all");
                if !["graph", "node", "edge", "all"].contains(&domain) {
                    return Err(format!("bad key domain {domain}"));
                }
                let ty = child.attribute("attr.type").unwrap_or("string");
                if !["boolean", "int", "long", "float", "double", "string"].contains(&ty) {
                    return Err(format!("bad attr.type {ty}"));
                }
                if keys.insert(id.to_string(), (domain.to_string(), ty.to_string())).is_some() {
                    return Err(format!("duplicate key {id}"));
                }
            }
            "graph" => seen_graph = true,
            other => return Err(format!("unexpected element {other}")),
        }
    }
    let graph = children.iter().find(|n| n.tag_name().name() == "graph").ok_or("no graph")?;
    if !matches!(graph.attribute("edgedefault"), Some("directed" | "undirected")) {
        return Err("graph needs edgedefault".into());
    }
    let check_data = |el: roxmltree::Node, domain: &str| -> Result<(), String> {
        for d in el.children().filter(|n| n.is_element()) {
            if d.tag_name().name() != "data" {
                return Err(format!("unexpected {} inside {domain}", d.tag_name().name()));
            }
            let key = d.attribute("key").ok_or("data without key")?;
            let (kd, ty) = keys.get(key).ok_or(format!("undeclared key {key}"))?;
            if kd != domain && kd != "all" {
                return Err(format!("key {key} used on {domain}"));
            }
            let text = d.text().unwrap_or("");
            let ok = match ty.as_str() {
                "int" | "long" => text.parse::<i64>().is_ok(),
                "float" | "double" => text.parse::<f64>().is_ok(),
                "boolean" => text == "true" || text == "false",
                _ => true,
            };
            if !ok {
                return Err(format!("value {text:?} is not {ty}"));
            }
        }
        Ok(())
    };
    let mut nodes = HashSet::new();
    let mut edges = Vec::new();
    let mut ids = HashSet::new();
    for el in graph.children().filter(|n| n.is_element()) {
        match el.tag_name().name() {
            "node" => {
                let id = el.attribute("id").ok_or("node without id")?;
                if !ids.insert(id.to_string()) {
                    return Err(format!("duplicate id {id}"));
                }
                nodes.insert(id.to_string());
                check_data(el, "node")?;
            }
            "edge" => {
                if let Some(id) = el.attribute("id") {
                    if !ids.insert(id.to_string()) {
                        return Err(format!("duplicate id {id}"));
                    }
                }
                let s = el.attribute("source").ok_or("edge without source")?;
                let t = el.attribute("target").ok_or("edge without target")?;
                edges.push((s.to_string(), t.to_string()));
                check_data(el, "edge")?;
            }
            "data" => {}
            other => return Err(format!("unexpected {other} in graph")),
        }
    }
    for (s, t) in edges {
        if !nodes.contains(&s) || !nodes.contains(&t) {
            return Err(format!("edge {s}->{t} references a missing node"));
        }
    }
    Ok(())
}

#[test]
fn export_is_valid_graphml() {
    let vocab: Vec<String> = ["a&b", "<tag>", "\"q\"", "it's", "plain"].map(String::from).to_vec();
    let psi = vec![vec![0.4, 0.3, 0.1, 0.1, 0.1]; 3];
    let graph = IndustryGraph::new(3, &[(0, 1), (1, 2), (2, 2), (0, 1)], &psi, &vocab, 5).unwrap();
    let xml = graph.to_graphml();
    validate(&xml).unwrap();
    let doc = roxmltree::Document::parse(&xml).unwrap();
    let label = doc.descendants().find(|n| n.attribute("key") == Some("label")).unwrap();
    assert_eq!(label.text(), Some("0: a&b <tag> \"q\" it's plain"));
    let weights: Vec<&str> = doc
        .descendants()
        .filter(|n| n.attribute("key") == Some("weight"))
        .filter_map(|n| n.text())
        .collect();
    assert_eq!(weights, ["2", "1", "1"]);
}

#[test]
fn validator_rejects_broken_documents() {
    assert!(validate("<graphml/>").is_err());
    let dangling = format!(
        "<graphml xmlns=\"{NS}\"><graph edgedefault=\"directed\"><node id=\"a\"/><edge source=\"a\" target=\"b\"/></graph></graphml>"
    );
    assert!(validate(&dangling).is_err());
    let undeclared = format!(
        "<graphml xmlns=\"{NS}\"><graph edgedefault=\"directed\"><node id=\"a\"><data key=\"x\">1</data></node></graph></graphml>"
    );
    assert!(validate(&undeclared).is_err());
}

#[test]
fn empty_graph_is_valid() {
    let graph = IndustryGraph::new(1, &[], &[], &[], 5).unwrap();
    validate(&graph.to_graphml()).unwrap();
}
