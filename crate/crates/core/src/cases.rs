//! The four benchmark cases: task text, schema and gold payload.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::json::{emit_canonical_json, parse_json};
use crate::schema::Schema;
use crate::toon::encode_toon;
use crate::value::{canonicalize, Value};

/// One benchmark case. The task text is split so each track can frame it:
/// `lead` names the record, `fields` lists what to return, `details` holds
/// the data lines.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub name: &'static str,
    pub lead: &'static str,
    pub fields: &'static str,
    pub details: &'static str,
    pub schema: Schema,
    pub gold: Value,
}

impl CaseSpec {
    /// The task as posed on the JSON tracks.
    pub fn task_body(&self) -> String {
        format!(
            "{}:\n{}\n\nReturn as JSON with fields for {}.",
            self.lead, self.details, self.fields
        )
    }
}

pub const CASE_NAMES: [&str; 4] = ["users", "order", "company", "invoice"];

pub fn builtin_cases() -> Vec<CaseSpec> {
    vec![users(), order(), company(), invoice()]
}

pub fn case_by_name(name: &str) -> Option<CaseSpec> {
    builtin_cases().into_iter().find(|c| c.name == name)
}

fn gold(json: &str) -> Value {
    parse_json(json).expect("built-in gold payloads are valid JSON")
}

fn users() -> CaseSpec {
    CaseSpec {
        name: "users",
        lead: "Create a user list",
        fields: "users array (with id, name, email, role)",
        details: "\
- User 1: Alice, alice@example.com, role admin
- User 2: Bob, bob@example.com, role editor
- User 3: Carol, carol@example.com, role viewer",
        schema: Schema::object([(
            "users",
            Schema::array(Schema::object([
                ("id", Schema::Int),
                ("name", Schema::Str),
                ("email", Schema::Str),
                ("role", Schema::Str),
            ])),
        )]),
        gold: gold(
            r#"{"users":[
                {"id":1,"name":"Alice","email":"alice@example.com","role":"admin"},
                {"id":2,"name":"Bob","email":"bob@example.com","role":"editor"},
                {"id":3,"name":"Carol","email":"carol@example.com","role":"viewer"}]}"#,
        ),
    }
}

fn order() -> CaseSpec {
    CaseSpec {
        name: "order",
        lead: "Create an order record",
        fields: "id, customer (with id and name), \nand items array (with sku, qty, price)",
        details: "\
- Order ID: 101
- Customer: Ada (ID: 9)
- Items:
  * Product A1: quantity 2, price $9.99 each
  * Product B2: quantity 1, price $14.50 each",
        schema: Schema::object([
            ("id", Schema::Int),
            (
                "customer",
                Schema::object([("id", Schema::Int), ("name", Schema::Str)]),
            ),
            (
                "items",
                Schema::array(Schema::object([
                    ("sku", Schema::Str),
                    ("qty", Schema::Int),
                    ("price", Schema::Float),
                ])),
            ),
        ]),
        gold: gold(
            r#"{"id":101,"customer":{"id":9,"name":"Ada"},"items":[
                {"sku":"A1","qty":2,"price":9.99},
                {"sku":"B2","qty":1,"price":14.50}]}"#,
        ),
    }
}

fn company() -> CaseSpec {
    let employee = Schema::object([
        ("id", Schema::Int),
        ("name", Schema::Str),
        ("title", Schema::Str),
        ("skills", Schema::array(Schema::Str)),
    ]);
    let team = Schema::object([
        ("name", Schema::Str),
        ("employees", Schema::array(employee)),
    ]);
    let department = Schema::object([
        ("name", Schema::Str),
        ("teams", Schema::array(team)),
    ]);
    CaseSpec {
        name: "company",
        lead: "Create a company record",
        fields: "name and departments array (each with name and teams array; \
                 each team with name and employees array; \
                 each employee with id, name, title, skills array)",
        details: "\
- Company: Acme Corp
- Department Engineering:
  * Team Platform: Dana (ID: 1, Staff Engineer, skills: rust, kubernetes), Eli (ID: 2, Engineer, no skills listed)
  * Team Mobile: Finn (ID: 3, Engineer, skills: swift)
- Department Sales:
  * Team EMEA: Gia (ID: 4, Account Executive, skills: negotiation, german, crm)",
        schema: Schema::object([
            ("name", Schema::Str),
            ("departments", Schema::array(department)),
        ]),
        gold: gold(
            r#"{"name":"Acme Corp","departments":[
                {"name":"Engineering","teams":[
                    {"name":"Platform","employees":[
                        {"id":1,"name":"Dana","title":"Staff Engineer","skills":["rust","kubernetes"]},
                        {"id":2,"name":"Eli","title":"Engineer","skills":[]}]},
                    {"name":"Mobile","employees":[
                        {"id":3,"name":"Finn","title":"Engineer","skills":["swift"]}]}]},
                {"name":"Sales","teams":[
                    {"name":"EMEA","employees":[
                        {"id":4,"name":"Gia","title":"Account Executive","skills":["negotiation","german","crm"]}]}]}]}"#,
        ),
    }
}

fn invoice() -> CaseSpec {
    CaseSpec {
        name: "invoice",
        lead: "Create an invoice record",
        fields: "invoice_no, date, customer (with name and vat_id), \
                 items array (with sku, description, qty, price), \
                 and totals (with item_count and total)",
        details: "\
- Invoice number: INV-2024-001, dated 2024-03-15
- Customer: Globex Ltd (VAT ID: GB123456789)
- Items:
  * W-1 Widget: quantity 3, price $4.50 each
  * G-2 Gadget: quantity 2, price $12.25 each
  * S-9 Support plan: quantity 1, price $99.99 each
- Totals: number of line items and the invoice total (sum of quantity times price)",
        schema: Schema::object([
            ("invoice_no", Schema::Str),
            ("date", Schema::Str),
            (
                "customer",
                Schema::object([("name", Schema::Str), ("vat_id", Schema::Str)]),
            ),
            (
                "items",
                Schema::array(Schema::object([
                    ("sku", Schema::Str),
                    ("description", Schema::Str),
                    ("qty", Schema::Int),
                    ("price", Schema::Float),
                ])),
            ),
            (
                "totals",
                Schema::object([("item_count", Schema::Int), ("total", Schema::Float)]),
            ),
        ]),
        gold: gold(
            r#"{"invoice_no":"INV-2024-001","date":"2024-03-15",
                "customer":{"name":"Globex Ltd","vat_id":"GB123456789"},
                "items":[
                    {"sku":"W-1","description":"Widget","qty":3,"price":4.50},
                    {"sku":"G-2","description":"Gadget","qty":2,"price":12.25},
                    {"sku":"S-9","description":"Support plan","qty":1,"price":99.99}],
                "totals":{"item_count":3,"total":137.99}}"#,
        ),
    }
}

#[derive(Debug, Error)]
#[error("cannot write {}: {source}", path.display())]
pub struct GoldWriteError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

/// Writes `<name>.gold.json` (canonical JSON) and `<name>.gold.toon`, both
/// newline-terminated, and returns their paths.
pub fn write_gold(case: &CaseSpec, dir: &Path) -> Result<[PathBuf; 2], GoldWriteError> {
    let json_path = dir.join(format!("{}.gold.json", case.name));
    let toon_path = dir.join(format!("{}.gold.toon", case.name));
    let json = emit_canonical_json(&canonicalize(&case.gold));
    let toon = encode_toon(&case.gold).expect("gold payloads are objects");
    for (path, body) in [(&json_path, json), (&toon_path, toon)] {
        fs::write(path, body + "\n").map_err(|source| GoldWriteError {
            path: path.clone(),
            source,
        })?;
    }
    Ok([json_path, toon_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::validate;
    use crate::value::deep_equal;

    #[test]
    fn registry_names_are_unique_and_ordered() {
        let names: Vec<_> = builtin_cases().iter().map(|c| c.name).collect();
        assert_eq!(names, CASE_NAMES);
    }

    #[test]
    fn every_gold_validates() {
        for case in builtin_cases() {
            assert_eq!(validate(&case.gold, &case.schema), vec![], "{}", case.name);
        }
    }

    #[test]
    fn order_matches_the_task_text() {
        let order = case_by_name("order").unwrap();
        assert_eq!(order.gold.get("items").unwrap().as_array().unwrap().len(), 2);
        let body = order.task_body();
        assert!(body.starts_with("Create an order record:\n- Order ID: 101\n"));
        assert!(body.ends_with(
            "\n\nReturn as JSON with fields for id, customer (with id and name), \nand items array (with sku, qty, price)."
        ));
    }

    #[test]
    fn invoice_total_is_the_sum_of_lines() {
        let inv = case_by_name("invoice").unwrap();
        let cents = |v: &Value| (v.as_f64().unwrap() * 100.0).round() as i64;
        let items = inv.gold.get("items").unwrap().as_array().unwrap();
        let sum: i64 = items
            .iter()
            .map(|it| cents(it.get("qty").unwrap()) / 100 * cents(it.get("price").unwrap()))
            .sum();
        let totals = inv.gold.get("totals").unwrap();
        assert_eq!(cents(totals.get("total").unwrap()), sum);
        assert_eq!(totals.get("item_count"), Some(&Value::int(items.len() as i64)));
    }

    #[test]
    fn gold_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for case in builtin_cases() {
            let [json_path, toon_path] = write_gold(&case, dir.path()).unwrap();
            let json = fs::read_to_string(&json_path).unwrap();
            let toon = fs::read_to_string(&toon_path).unwrap();
            assert!(json.ends_with('\n') && toon.ends_with('\n'));
            assert!(deep_equal(&parse_json(&json).unwrap(), &case.gold).0);
            let decoded = crate::toon::parse_toon(&toon).unwrap().root;
            assert!(deep_equal(&decoded, &case.gold).0);
            // A second write is byte-identical.
            write_gold(&case, dir.path()).unwrap();
            assert_eq!(fs::read_to_string(&json_path).unwrap(), json);
            assert_eq!(fs::read_to_string(&toon_path).unwrap(), toon);
        }
    }

    #[test]
    fn write_errors_name_the_path() {
        let err = write_gold(&builtin_cases()[0], Path::new("/nonexistent/dir")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/users.gold.json"));
    }
}
