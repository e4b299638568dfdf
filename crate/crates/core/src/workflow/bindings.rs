use std::sync::Arc;

use super::value::Value;
use crate::ncen_api::{FundBlock, NcenApi, Report};

/// The host side of the sandbox: the only functions, besides the builtins,
/// that a workflow can reach.
pub trait ApiBindings {
    fn has(&self, name: &str) -> bool;
    fn invoke(&self, name: &str, args: &[Value]) -> Result<Value, String>;
}

pub const NCEN_API_NAMES: [&str; 6] =
    ["get_report", "get_all_reports", "fetch_block", "segment_report", "extract_entity", "extract_value"];

/// Binds the six N-CEN APIs to an [`NcenApi`].
pub struct NcenBindings<'a> {
    api: &'a NcenApi,
}

impl<'a> NcenBindings<'a> {
    pub fn new(api: &'a NcenApi) -> Self {
        Self { api }
    }
}

fn signature_error(name: &str, expected: &str, args: &[Value]) -> String {
    let got: Vec<&str> = args.iter().map(Value::type_name).collect();
    format!("{name} expects ({expected}) but was given ({})", got.join(", "))
}

fn report_arg(v: &Value) -> Option<&Report> {
    match v {
        Value::Report(r) => Some(r),
        _ => None,
    }
}

fn block_arg(v: &Value) -> Option<&FundBlock> {
    match v {
        Value::Block(b) => Some(b),
        _ => None,
    }
}

impl ApiBindings for NcenBindings<'_> {
    fn has(&self, name: &str) -> bool {
        NCEN_API_NAMES.contains(&name)
    }

    fn invoke(&self, name: &str, args: &[Value]) -> Result<Value, String> {
        let api = self.api;
        match (name, args) {
            ("get_report", [Value::Str(fund)]) => api.get_report(fund).map(Value::Report).map_err(|e| e.to_string()),
            ("get_report", _) => Err(signature_error(name, "fund name", args)),
            ("get_all_reports", []) => Ok(Value::list(api.get_all_reports().into_iter().map(Value::Report).collect())),
            ("get_all_reports", _) => Err(signature_error(name, "", args)),
            ("fetch_block", [r, Value::Str(fund)]) if report_arg(r).is_some() => api
                .fetch_block(report_arg(r).unwrap(), fund)
                .map(|b| Value::Block(Arc::new(b)))
                .map_err(|e| e.to_string()),
            ("fetch_block", _) => Err(signature_error(name, "report, fund name", args)),
            ("segment_report", [r]) if report_arg(r).is_some() => Ok(Value::list(
                api.segment_report(report_arg(r).unwrap()).into_iter().map(|b| Value::Block(Arc::new(b))).collect(),
            )),
            ("segment_report", _) => Err(signature_error(name, "report", args)),
            ("extract_entity", [b, Value::Str(label)]) if block_arg(b).is_some() => {
                Ok(Value::strings(api.extract_entity(block_arg(b).unwrap(), label)))
            }
            ("extract_entity", _) => Err(signature_error(name, "fund block, entity label", args)),
            ("extract_value", [b, Value::Str(label)]) if block_arg(b).is_some() => {
                api.extract_value(block_arg(b).unwrap(), label).map(Value::Number).map_err(|e| e.to_string())
            }
            ("extract_value", _) => Err(signature_error(name, "fund block, value label", args)),
            _ => Err(format!("`{name}` is not a registered API")),
        }
    }
}
