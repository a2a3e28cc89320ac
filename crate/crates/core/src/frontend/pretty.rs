//! Pretty-printer for the toy language; `parse(pretty(p)) == p` up to
//! statement ids and whitespace.

use super::ast::*;

pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    for function in &program.functions {
        out.push_str(&function.name);
        out.push('(');
        out.push_str(&function.params.join(", "));
        out.push_str(") {\n");
        print_block(&function.body, 1, &mut out);
        out.push_str("}\n");
    }
    out
}

fn print_block(stmts: &[Stmt], depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    for stmt in stmts {
        match &stmt.kind {
            StmtKind::Assign { dst, src } => out.push_str(&format!("{pad}{dst} = {src};\n")),
            StmtKind::Arith { dst, lhs, op, rhs } => {
                out.push_str(&format!("{pad}{dst} = {lhs} {op} {rhs};\n"))
            }
            StmtKind::FieldStore { base, field, src } => {
                out.push_str(&format!("{pad}{base}.{field} = {src};\n"))
            }
            StmtKind::FieldLoad { dst, base, field } => {
                out.push_str(&format!("{pad}{dst} = {base}.{field};\n"))
            }
            StmtKind::PtrStore { ptr, src } => out.push_str(&format!("{pad}*{ptr} = {src};\n")),
            StmtKind::PtrLoad { dst, ptr } => out.push_str(&format!("{pad}{dst} = *{ptr};\n")),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                out.push_str(&format!("{pad}if ({cond}) {{\n"));
                print_block(then_branch, depth + 1, out);
                if else_branch.is_empty() {
                    out.push_str(&format!("{pad}}}\n"));
                } else {
                    out.push_str(&format!("{pad}}} else {{\n"));
                    print_block(else_branch, depth + 1, out);
                    out.push_str(&format!("{pad}}}\n"));
                }
            }
            StmtKind::While { cond, body } => {
                out.push_str(&format!("{pad}while ({cond}) {{\n"));
                print_block(body, depth + 1, out);
                out.push_str(&format!("{pad}}}\n"));
            }
            StmtKind::Call { dst, callee, args } => {
                let rendered: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                out.push_str(&format!("{pad}{dst} = {callee}({});\n", rendered.join(", ")));
            }
            StmtKind::Return { value } => out.push_str(&format!("{pad}return {value};\n")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    fn strip_ids(program: &Program) -> Program {
        fn walk(stmts: &[Stmt]) -> Vec<Stmt> {
            stmts
                .iter()
                .map(|s| Stmt {
                    id: 0,
                    line: 0,
                    kind: match &s.kind {
                        StmtKind::If {
                            cond,
                            then_branch,
                            else_branch,
                        } => StmtKind::If {
                            cond: cond.clone(),
                            then_branch: walk(then_branch),
                            else_branch: walk(else_branch),
                        },
                        StmtKind::While { cond, body } => StmtKind::While {
                            cond: cond.clone(),
                            body: walk(body),
                        },
                        other => other.clone(),
                    },
                })
                .collect()
        }
        Program {
            functions: program
                .functions
                .iter()
                .map(|f| Function {
                    name: f.name.clone(),
                    params: f.params.clone(),
                    body: walk(&f.body),
                    header_line: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn round_trip_up_to_whitespace() {
        let src = "foo(x, y) {\n  a = NULL;\n  if (x > y) {\n    b = bar(a);\n  } else {\n    b = x;\n  }\n  while (x < y) {\n    y = y - 1;\n  }\n  c = *b;\n  o.fld = c;\n  return c;\n}\nbar(p) {\n  return p;\n}\n";
        let once = parse(src).unwrap();
        let twice = parse(&pretty(&once)).unwrap();
        assert_eq!(strip_ids(&once), strip_ids(&twice));
    }
}
