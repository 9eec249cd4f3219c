#include "personable/store.hpp"

#include <fstream>
#include <sstream>

namespace personable {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Ids become file names; anything outside a safe set is hex-escaped.
std::string file_stem(const std::string& id)
{
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned char c : id) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.')
            out.push_back(static_cast<char>(c));
        else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 15]);
        }
    }
    if (out.empty() || out.front() == '.')
        out.insert(out.begin(), '_');
    return out;
}

std::string read_file(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json parse_record(const std::string& text, const fs::path& file)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::CorruptRecord, file.string() + ": " + e.what());
    }
}

std::vector<json> read_lines(const fs::path& file)
{
    std::vector<json> out;
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty())
            out.push_back(parse_record(line, file));
    return out;
}

} // namespace

SessionStore::SessionStore(fs::path root) : root_(std::move(root))
{
    for (const char* sub : {"sites", "templates", "theories", "observed", "sessions"})
        fs::create_directories(root_ / sub);
}

void SessionStore::write_atomically(const fs::path& file, const std::string& text) const
{
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out)
            throw Error(ErrorCode::CorruptRecord, "cannot write " + tmp.string());
    }
    fs::rename(tmp, file);
}

void SessionStore::append_line(const fs::path& file, const std::string& line)
{
    std::lock_guard lock(append_mutex_);
    std::ofstream out(file, std::ios::app);
    out << line << '\n';
    out.flush();
    if (!out)
        throw Error(ErrorCode::CorruptRecord, "cannot append to " + file.string());
}

void SessionStore::put_site(const Site& site)
{
    write_atomically(root_ / "sites" / (file_stem(site.id) + ".site"), site_to_json(site).dump(2));
}

Site SessionStore::get_site(const std::string& id) const
{
    const fs::path file = root_ / "sites" / (file_stem(id) + ".site");
    if (!fs::exists(file))
        throw Error(ErrorCode::UnknownSite, "no stored site '" + id + "'");
    try {
        return parse_site(read_file(file));
    } catch (const Error& e) {
        throw Error(ErrorCode::CorruptRecord, file.string() + ": " + e.what());
    }
}

std::vector<std::string> SessionStore::site_ids() const
{
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root_ / "sites")) {
        if (entry.path().extension() != ".site")
            continue;
        const json doc = parse_record(read_file(entry.path()), entry.path());
        ids.push_back(doc.value("site", std::string()));
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

void SessionStore::put_templates(const std::string& site_id, std::span<const Template> templates)
{
    json list = json::array();
    for (const auto& t : templates)
        list.push_back(to_json(t));
    write_atomically(root_ / "templates" / (file_stem(site_id) + ".json"), list.dump(2));
}

std::vector<Template> SessionStore::get_templates(const std::string& site_id, const InteractionProgram& base) const
{
    const fs::path file = root_ / "templates" / (file_stem(site_id) + ".json");
    if (!fs::exists(file))
        return {};
    std::vector<Template> out;
    try {
        for (const auto& j : parse_record(read_file(file), file))
            out.push_back(template_from_json(j, base));
    } catch (const Error& e) {
        throw Error(ErrorCode::CorruptRecord, file.string() + ": " + e.what());
    }
    return out;
}

void SessionStore::put_theory(const std::string& site_id, const DomainTheory& theory)
{
    write_atomically(root_ / "theories" / (file_stem(site_id) + ".json"), to_json(theory).dump(2));
}

std::optional<DomainTheory> SessionStore::get_theory(const std::string& site_id) const
{
    const fs::path file = root_ / "theories" / (file_stem(site_id) + ".json");
    if (!fs::exists(file))
        return std::nullopt;
    try {
        return parse_theory(parse_record(read_file(file), file));
    } catch (const Error& e) {
        throw Error(ErrorCode::CorruptRecord, file.string() + ": " + e.what());
    }
}

void SessionStore::append_observed(const std::string& site_id, const Trace& trace)
{
    append_line(root_ / "observed" / (file_stem(site_id) + ".jsonl"), to_json(trace).dump());
}

void SessionStore::clear_observed(const std::string& site_id)
{
    std::lock_guard lock(append_mutex_);
    fs::remove(root_ / "observed" / (file_stem(site_id) + ".jsonl"));
}

std::vector<Trace> SessionStore::get_observed(const std::string& site_id) const
{
    const fs::path file = root_ / "observed" / (file_stem(site_id) + ".jsonl");
    std::vector<Trace> out;
    if (!fs::exists(file))
        return out;
    for (const auto& j : read_lines(file)) {
        try {
            out.push_back(trace_from_json(j));
        } catch (const Error& e) {
            throw Error(ErrorCode::CorruptRecord, file.string() + ": " + e.what());
        }
    }
    return out;
}

void SessionStore::append_session_event(const std::string& session_id, const json& record)
{
    append_line(root_ / "sessions" / (file_stem(session_id) + ".log"), record.dump());
}

bool SessionStore::has_session(const std::string& session_id) const
{
    return fs::exists(root_ / "sessions" / (file_stem(session_id) + ".log"));
}

std::vector<json> SessionStore::session_log(const std::string& session_id) const
{
    const fs::path file = root_ / "sessions" / (file_stem(session_id) + ".log");
    if (!fs::exists(file))
        throw Error(ErrorCode::UnknownSession, "no session '" + session_id + "'");
    auto records = read_lines(file);
    if (records.empty() || records.front().value("event", std::string()) != "create")
        throw Error(ErrorCode::CorruptRecord, file.string() + ": log does not start with a create record");
    return records;
}

void SessionStore::put_snapshot(const std::string& session_id, const json& snapshot)
{
    write_atomically(root_ / "sessions" / (file_stem(session_id) + ".snapshot"), snapshot.dump());
}

std::optional<json> SessionStore::get_snapshot(const std::string& session_id) const
{
    const fs::path file = root_ / "sessions" / (file_stem(session_id) + ".snapshot");
    if (!fs::exists(file))
        return std::nullopt;
    return parse_record(read_file(file), file);
}

} // namespace personable
