#include "personable/ebg.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace personable {

namespace {

std::vector<std::string> split_tabs(const std::string& line)
{
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos)
            break;
        start = tab + 1;
    }
    if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r')
        fields.back().pop_back();
    return fields;
}

} // namespace

std::vector<Trace> parse_trace_log(std::istream& in)
{
    std::vector<Trace> traces;
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.front() == '#' || line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto f = split_tabs(line);
        if (f.size() != 6)
            throw Error(ErrorCode::ParseError,
                        std::to_string(lineno) + ":1: expected 6 tab-separated fields, got " + std::to_string(f.size()));
        TraceEvent ev;
        try {
            ev.kind = event_kind_from_string(f[2]);
        } catch (const Error& e) {
            throw Error(ErrorCode::ParseError, std::to_string(lineno) + ":3: " + e.what());
        }
        ev.name = f[3];
        ev.value = f[4];
        const auto [ptr, ec] = std::from_chars(f[5].data(), f[5].data() + f[5].size(), ev.timestamp);
        if (ec != std::errc() || ptr != f[5].data() + f[5].size())
            throw Error(ErrorCode::ParseError, std::to_string(lineno) + ":6: bad timestamp '" + f[5] + "'");
        const auto key = std::make_pair(f[0], f[1]);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, traces.size()).first;
            traces.push_back(Trace{f[0], f[1], {}});
        }
        traces[it->second].events.push_back(std::move(ev));
    }
    return traces;
}

std::vector<Trace> load_trace_log(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw Error(ErrorCode::ParseError, "cannot open trace log " + file.string());
    return parse_trace_log(in);
}

void write_trace_log(std::ostream& out, std::span<const Trace> traces)
{
    for (const auto& t : traces)
        for (const auto& e : t.events)
            out << t.user_id << '\t' << t.session_id << '\t' << to_string(e.kind) << '\t' << e.name << '\t' << e.value
                << '\t' << e.timestamp << '\n';
}

} // namespace personable
