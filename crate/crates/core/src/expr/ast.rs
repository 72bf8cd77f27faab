use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
        }
    }

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
            BinOp::Lt => bool_f(a < b),
            BinOp::Le => bool_f(a <= b),
            BinOp::Gt => bool_f(a > b),
            BinOp::Ge => bool_f(a >= b),
            BinOp::Eq => bool_f(a == b),
            BinOp::Ne => bool_f(a != b),
        }
    }
}

#[inline]
fn bool_f(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Asin,
    Acos,
    Atan,
    Atan2,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
    Pow,
    Floor,
    Ceil,
    Mod,
    Clamp,
    If,
}

/// Accepted argument counts; `max == None` means variadic.
pub struct Arity {
    pub min: usize,
    pub max: Option<usize>,
}

impl Func {
    pub fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "asin" => Func::Asin,
            "acos" => Func::Acos,
            "atan" => Func::Atan,
            "atan2" => Func::Atan2,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            "floor" => Func::Floor,
            "ceil" => Func::Ceil,
            "mod" => Func::Mod,
            "clamp" => Func::Clamp,
            "if" => Func::If,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Asin => "asin",
            Func::Acos => "acos",
            Func::Atan => "atan",
            Func::Atan2 => "atan2",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
            Func::Floor => "floor",
            Func::Ceil => "ceil",
            Func::Mod => "mod",
            Func::Clamp => "clamp",
            Func::If => "if",
        }
    }

    pub fn arity(self) -> Arity {
        let fixed = |n| Arity { min: n, max: Some(n) };
        match self {
            Func::Min | Func::Max => Arity { min: 2, max: None },
            Func::Atan2 | Func::Pow | Func::Mod => fixed(2),
            Func::Clamp | Func::If => fixed(3),
            _ => fixed(1),
        }
    }

    /// Applies the function to already-evaluated arguments.
    ///
    /// `if` is handled lazily by the evaluator and only reaches here from
    /// constant folding.
    pub fn apply(self, args: &[f64]) -> f64 {
        let a = args[0];
        match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Tan => a.tan(),
            Func::Asin => a.asin(),
            Func::Acos => a.acos(),
            Func::Atan => a.atan(),
            Func::Atan2 => a.atan2(args[1]),
            Func::Exp => a.exp(),
            Func::Log => a.ln(),
            Func::Sqrt => a.sqrt(),
            Func::Abs => a.abs(),
            Func::Min => args[1..].iter().fold(a, |m, &v| m.min(v)),
            Func::Max => args[1..].iter().fold(a, |m, &v| m.max(v)),
            Func::Pow => a.powf(args[1]),
            Func::Floor => a.floor(),
            Func::Ceil => a.ceil(),
            Func::Mod => a % args[1],
            Func::Clamp => a.max(args[1]).min(args[2]),
            Func::If => {
                if a != 0.0 {
                    args[1]
                } else {
                    args[2]
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Index into the owning program's variable list.
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    #[inline]
    pub fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => vars[*i],
            Expr::Neg(e) => -e.eval(vars),
            Expr::Bin(op, a, b) => op.apply(a.eval(vars), b.eval(vars)),
            Expr::Call(Func::If, args) => {
                if args[0].eval(vars) != 0.0 {
                    args[1].eval(vars)
                } else {
                    args[2].eval(vars)
                }
            }
            Expr::Call(f, args) => match args.len() {
                1 => f.apply(&[args[0].eval(vars)]),
                2 => f.apply(&[args[0].eval(vars), args[1].eval(vars)]),
                3 => f.apply(&[args[0].eval(vars), args[1].eval(vars), args[2].eval(vars)]),
                _ => {
                    let vals: Vec<f64> = args.iter().map(|a| a.eval(vars)).collect();
                    f.apply(&vals)
                }
            },
        }
    }

    /// Collapses constant subtrees. Results are bit-identical to runtime
    /// evaluation; non-finite results are left unfolded so the tree still prints.
    pub fn fold(self) -> Expr {
        let folded = match self {
            Expr::Neg(e) => Expr::Neg(Box::new(e.fold())),
            Expr::Bin(op, a, b) => Expr::Bin(op, Box::new(a.fold()), Box::new(b.fold())),
            Expr::Call(f, args) => Expr::Call(f, args.into_iter().map(Expr::fold).collect()),
            leaf => return leaf,
        };
        let constant = match &folded {
            Expr::Neg(e) => e.as_num().map(|v| -v),
            Expr::Bin(op, a, b) => match (a.as_num(), b.as_num()) {
                (Some(x), Some(y)) => Some(op.apply(x, y)),
                _ => None,
            },
            Expr::Call(f, args) => {
                let vals: Option<Vec<f64>> = args.iter().map(Expr::as_num).collect();
                vals.map(|v| f.apply(&v))
            }
            _ => None,
        };
        match constant {
            Some(v) if v.is_finite() => Expr::Num(v),
            _ => folded,
        }
    }

    fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub(crate) fn display<'a>(&'a self, names: &'a [String]) -> DisplayExpr<'a> {
        DisplayExpr { expr: self, names }
    }
}

pub(crate) struct DisplayExpr<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

// Fully parenthesized so the printed form re-parses to the same tree.
impl fmt::Display for DisplayExpr<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Num(v) if v.is_sign_negative() => write!(f, "(-{})", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "{}", self.names[*i]),
            Expr::Neg(e) => write!(f, "(-{})", e.display(self.names)),
            Expr::Bin(op, a, b) => {
                write!(f, "({} {} {})", a.display(self.names), op.symbol(), b.display(self.names))
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", a.display(self.names))?;
                }
                write!(f, ")")
            }
        }
    }
}
