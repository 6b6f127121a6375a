use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn symtensor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symtensor"))
        .args(args)
        .output()
        .expect("spawn symtensor")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn info_reports_contraction_symmetry() {
    let o = symtensor(&[
        "info",
        "--expr",
        "C[i,l] = A[i,j,k] * B[j,k,l]",
        "--sym",
        "A: {i}{j,k}; B: {j,k}{l}",
        "--extents",
        "i=3,j=4,k=4,l=2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("gcs: {i}{l}{j,k}\n"), "{text}");
    assert!(text.contains("output symmetry: C{i}{l}\n"), "{text}");
    assert!(text.contains("dependency graph:\n  k -> j\n"), "{text}");
    assert!(text.contains("  A{i}{j,k}: 30 of 48 dense\n"), "{text}");
}

#[test]
fn codegen_ir_for_symmetric_plus_plain_matrix() {
    let o = symtensor(&[
        "codegen",
        "--expr",
        "C[i,j] = A[i,j] + B[i,j]",
        "--sym",
        "A: {i,j}",
        "--extents",
        "i=4,j=4",
        "--emit",
        "ir",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let expected = "\
# C[i,j] = A[i,j] + B[i,j]
# gcs: {i}{j}
# output symmetry: C{i}{j}
C = 0
for i
  for j <= i
    C[i,j] = A[i,j] + B[i,j]
  for j > i
    C[i,j] = A[j,i] + B[i,j]
";
    assert_eq!(stdout(&o), expected);
}

#[test]
fn codegen_c_defines_the_kernel() {
    let o = symtensor(&[
        "codegen",
        "--expr",
        "C[i,j] = A[i,j] + B[i,j]",
        "--sym",
        "A: {i,j}; B: {i,j}",
        "--emit",
        "c",
        "--kernel",
        "add",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text
        .contains("void add(double* out, const double* A, const double* B, const int* extents)"));
    assert!(
        text.contains("out[i*(i+1)/2 + j] = A[i*(i+1)/2 + j] + B[i*(i+1)/2 + j];"),
        "{text}"
    );
}

#[test]
fn syntax_errors_exit_2_with_a_caret() {
    let o = symtensor(&["codegen", "--expr", "C[i,j] = A[i,j +"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("1 | C[i,j] = A[i,j +\n"), "{err}");
    assert!(err.contains("  |                ^"), "{err}");

    let o = symtensor(&["info", "--expr", "C[i] = A[i,j]", "--sym", "A: {i,j"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--> sym:1:"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["codegen", "--expr", "C[i] = A[i]", "--emit", "llvm"],
        vec![
            "codegen",
            "--expr",
            "C[i,j] = A[i,j]",
            "--sym",
            "A: {i,j}",
            "--extents",
            "i=3,j=4",
        ],
        vec!["codegen", "--expr", "C[i,j] = A[i,j]", "--extents", "i=3"],
        vec!["frobnicate"],
        vec!["verify"],
    ] {
        let o = symtensor(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn verify_suite_passes() {
    let suite = fixture("suite.json");
    let o = symtensor(&[
        "verify",
        "--problem",
        &suite,
        "--seed",
        "7",
        "--trials",
        "2",
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("24/24 passed\n"));

    let o = symtensor(&["verify", "--problem", &suite, "--json", "--scalar", "float"]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["total"], 12);
    assert_eq!(doc["reports"][0]["output_symmetry"], "C{i,j}");
}

#[test]
fn verify_is_deterministic() {
    let suite = fixture("suite.json");
    let a = symtensor(&["verify", "--problem", &suite, "--json", "--seed", "3"]);
    let b = symtensor(&["verify", "--problem", &suite, "--json", "--seed", "3"]);
    assert_eq!(a.stdout, b.stdout);
}

fn write_inputs(dir: &tempfile::TempDir) -> (String, String) {
    let a = dir.path().join("A.json");
    let b = dir.path().join("B.json");
    fs::write(
        &a,
        r#"{"extents":[3,3],"symmetry":[["i","j"]],"index_vars":["i","j"],"storage_perm":[0,1],"values":[1,2,3,4,5,6]}"#,
    )
    .unwrap();
    fs::write(
        &b,
        r#"{"extents":[3,3],"symmetry":[["i"],["j"]],"index_vars":["i","j"],"storage_perm":[0,1],"values":[10,20,30,40,50,60,70,80,90]}"#,
    )
    .unwrap();
    (format!("A={}", a.display()), format!("B={}", b.display()))
}

#[test]
fn run_writes_the_output_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = write_inputs(&dir);
    let out = dir.path().join("C.json");
    let problem = fixture("matrix_add.json");
    let o = symtensor(&[
        "run",
        "--problem",
        &problem,
        "--input",
        &a,
        "--input",
        &b,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let c: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    // A unpacks to [[1,2,4],[2,3,5],[4,5,6]].
    assert_eq!(
        c["values"],
        serde_json::json!([11, 22, 34, 42, 53, 65, 74, 85, 96])
    );
    assert_eq!(c["symmetry"], serde_json::json!([["i"], ["j"]]));
}

#[test]
fn run_with_missing_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = write_inputs(&dir);
    let out = dir.path().join("C.json");
    let problem = fixture("matrix_add.json");
    let o = symtensor(&[
        "run",
        "--problem",
        &problem,
        "--input",
        &a,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("missing input tensor `B`"),
        "{}",
        stderr(&o)
    );
    assert!(!out.exists());
}
