#include "mcem/trace.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mcem/errors.hpp"

namespace mcem {

const IterationRecord& Trace::back() const {
    if (records.empty()) throw error("Trace::back on an empty trace");
    return records.back();
}

void Trace::push(IterationRecord rec) {
    if (rec.t < 0) throw error("trace: t must be >= 0");
    if (rec.m < 0) throw error("trace: m must be >= 0");
    if (!records.empty()) {
        if (rec.t <= records.back().t)
            throw error("trace: t must increase strictly");
        if (rec.p < records.back().p)
            throw error("trace: p must be nondecreasing");
    }
    if (rec.theta.dim() != component_names.size())
        throw error("trace: record dimension does not match component names");
    records.push_back(std::move(rec));
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string trace_to_csv(const Trace& trace) {
    std::ostringstream os;
    os << "t,m,p,loglik";
    for (const auto& name : trace.component_names) os << ',' << name;
    os << '\n';
    for (const auto& rec : trace.records) {
        os << rec.t << ',' << rec.m << ',' << rec.p << ','
           << format_double(rec.loglik);
        for (double v : rec.theta.values()) os << ',' << format_double(v);
        os << '\n';
    }
    return os.str();
}

void trace_write(const Trace& trace, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for writing");
    f << trace_to_csv(trace);
    f.flush();
    if (!f) throw io_error("write failed for '" + path + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_field_double(const std::string& s, const std::string& path) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || s.empty())
        throw io_error("'" + path + "': bad numeric field '" + s + "'");
    return v;
}

std::int64_t parse_field_int(const std::string& s, const std::string& path) {
    char* end = nullptr;
    errno = 0;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || s.empty() || errno == ERANGE)
        throw io_error("'" + path + "': bad integer field '" + s + "'");
    return v;
}

} // namespace

Trace trace_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(f, line))
        throw io_error("'" + path + "': empty file, expected a header");
    auto cols = split_csv_line(line);
    if (cols.size() < 4 || cols[0] != "t" || cols[1] != "m" || cols[2] != "p" ||
        cols[3] != "loglik")
        throw io_error("'" + path + "': header must start with t,m,p,loglik");

    Trace tr;
    tr.component_names.assign(cols.begin() + 4, cols.end());
    std::vector<Domain> domains(tr.component_names.size(), Domain::unconstrained);

    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != cols.size())
            throw io_error("'" + path + "': row has " +
                           std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(cols.size()));
        IterationRecord rec;
        rec.t = parse_field_int(fields[0], path);
        rec.m = parse_field_int(fields[1], path);
        rec.p = parse_field_int(fields[2], path);
        rec.loglik = parse_field_double(fields[3], path);
        std::vector<double> values;
        values.reserve(tr.component_names.size());
        for (std::size_t i = 4; i < fields.size(); ++i)
            values.push_back(parse_field_double(fields[i], path));
        rec.theta = Theta(tr.component_names, std::move(values), domains);
        tr.push(std::move(rec));
    }
    return tr;
}

} // namespace mcem
