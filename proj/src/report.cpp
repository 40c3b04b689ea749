#include "epflow/scenario.hpp"

#include "json.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace epflow {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string show(const json& v)
{
    if (v.is_null()) return "n/a";
    if (v.is_number_float()) {
        std::ostringstream os;
        os << std::setprecision(6) << v.get<double>();
        return os.str();
    }
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

const char* status_text(int code)
{
    switch (code) {
    case exit_ok: return "success";
    case exit_config: return "configuration error";
    case exit_numerical: return "numerical abort";
    case exit_acceptance: return "acceptance failure";
    }
    return "unknown";
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p)
{
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

void table_row(std::ostream& os, const std::vector<std::string>& cells)
{
    os << '|';
    for (const auto& c : cells) os << ' ' << c << " |";
    os << '\n';
}

void markdown_table(std::ostream& os, const std::vector<std::vector<std::string>>& rows, std::size_t max_rows)
{
    if (rows.empty()) return;
    table_row(os, rows.front());
    os << '|';
    for (std::size_t i = 0; i < rows.front().size(); ++i) os << " --- |";
    os << '\n';
    std::size_t body = rows.size() - 1;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        // long series: head and tail only
        if (body > max_rows && i > max_rows / 2 && i <= body - max_rows / 2) {
            if (i == max_rows / 2 + 1) os << "| ... (" << body - 2 * (max_rows / 2) << " rows omitted) |\n";
            continue;
        }
        table_row(os, rows[i]);
    }
}

}  // namespace

std::string emit_report(const std::string& run_dir)
{
    const fs::path dir(run_dir);
    const fs::path summary = dir / "summary.jsonl";
    if (!fs::exists(summary))
        throw Error(ErrorCode::io, "incomplete run directory '" + run_dir + "': missing summary.jsonl");

    std::vector<json> records;
    {
        std::ifstream in(summary);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                records.push_back(json::parse(line));
            } catch (const json::exception& e) {
                throw Error(ErrorCode::io, "summary.jsonl is malformed: " + std::string(e.what()));
            }
        }
    }
    const json* run = nullptr;
    const json* status = nullptr;
    for (const json& r : records) {
        if (r.value("record", "") == "run") run = &r;
        if (r.value("record", "") == "status") status = &r;
    }
    if (!run || !status) throw Error(ErrorCode::io, "summary.jsonl lacks the run or status record");

    std::vector<std::string> missing;
    for (const auto& a : (*status)["artifacts"])
        if (!fs::exists(dir / a.get<std::string>())) missing.push_back(a.get<std::string>());
    if (!fs::exists(dir / "invariants.csv") &&
        std::find(missing.begin(), missing.end(), "invariants.csv") == missing.end())
        missing.push_back("invariants.csv");
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw Error(ErrorCode::io, "incomplete run directory '" + run_dir + "': missing " + list);
    }

    const json& cfg = (*run)["config"];
    const std::string scenario = cfg.value("scenario", "unknown");
    const int code = (*status)["exit_code"].get<int>();
    std::ostringstream os;
    os << "# Run report: " << scenario << "\n\n";
    os << "Status: " << status_text(code) << " (exit " << code << ")";
    if (!(*status)["message"].get<std::string>().empty()) os << ": " << (*status)["message"].get<std::string>();
    os << "\n\n";
    os << "gamma = " << show(cfg["gamma"]) << ", alpha = " << show(cfg["alpha"]) << ", delta = " << show(cfg["delta"])
       << ", field sign = " << show(cfg["field_sign"]) << "\n\n";

    int passed = 0, total = 0;
    std::ostringstream inv;
    inv << "| check | value | bound | result |\n| --- | --- | --- | --- |\n";
    for (const json& r : records)
        if (r["record"] == "check") {
            ++total;
            bool ok = r["pass"].get<bool>();
            passed += ok;
            inv << "| " << show(r["name"]) << " | " << show(r["value"]) << " | " << show(r["relation"]) << ' '
                << show(r["bound"]) << " | " << (ok ? "PASS" : "FAIL") << " |\n";
        }
    os << "## Invariants (" << passed << " of " << total << " pass)\n\n";
    if (total) os << inv.str() << '\n';
    else os << "No invariant checks were recorded.\n\n";

    std::ostringstream fits;
    int nfit = 0;
    for (const json& r : records)
        if (r["record"] == "fit") {
            ++nfit;
            fits << "| " << show(r["name"]) << " | " << show(r["value"]) << " | " << show(r["target"]) << " | "
                 << show(r["stderr"]) << " | " << show(r["note"]) << " |\n";
        }
    if (nfit) {
        os << "## Fitted exponents\n\n| fit | value | target | stderr | what |\n| --- | --- | --- | --- | --- |\n"
           << fits.str() << '\n';
    }

    os << "## Metrics\n\n| metric | value |\n| --- | --- |\n";
    for (const json& r : records)
        if (r["record"] == "metric") os << "| " << show(r["name"]) << " | " << show(r["value"]) << " |\n";
    os << '\n';

    std::ostringstream hist;
    int nflag = 0;
    bool ever = false;
    for (const json& r : records)
        if (r["record"] == "apriori") {
            ++nflag;
            ever = ever || r["tripped"].get<bool>();
            hist << "| " << show(r["tau"]) << " | " << show(r["theta_w2inf"]) << " | " << show(r["J_w1inf"]) << " | "
                 << (r["tripped"].get<bool>() ? "tripped" : "clear") << " |\n";
        }
    if (nflag) {
        os << "## A priori flag history\n\n"
           << (ever ? "The a priori bounds were exceeded during the run.\n\n" : "The a priori bounds held throughout.\n\n")
           << "| tau | theta W^{2,inf} | J - 1 W^{1,inf} | state |\n| --- | --- | --- | --- |\n"
           << hist.str() << '\n';
    }

    for (const auto& a : (*status)["artifacts"]) {
        std::string name = a.get<std::string>();
        if (name == "summary.jsonl" || name == "invariants.csv" || name == "trajectory.csv") continue;
        os << "## " << name << "\n\n";
        markdown_table(os, read_csv(dir / name), 12);
        os << '\n';
    }

    std::ostringstream logs;
    for (const json& r : records)
        if (r["record"] == "log" || r["record"] == "abort") logs << "- " << show(r["message"]) << '\n';
    if (!logs.str().empty()) os << "## Log\n\n" << logs.str() << '\n';

    std::string text = os.str();
    std::ofstream out(dir / "report.md");
    if (!out) throw Error(ErrorCode::io, "cannot write report.md in '" + run_dir + "'");
    out << text;
    return text;
}

}  // namespace epflow
