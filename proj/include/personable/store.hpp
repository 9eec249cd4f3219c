#pragma once

// Durable storage under one data directory:
//
//   sites/<id>.site             site descriptions
//   templates/<site>.json       template lists
//   theories/<site>.json        domain theories
//   observed/<site>.jsonl       traces fed to remembrance, one per line
//   sessions/<id>.log           append-only session event log, one JSON object per line
//   sessions/<id>.snapshot      last saved session state
//
// Missing records raise the matching Unknown* error; unreadable ones raise
// CorruptRecord.

#include "personable/ebg.hpp"
#include "personable/site.hpp"

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace personable {

class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root);

    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }

    void put_site(const Site& site);
    [[nodiscard]] Site get_site(const std::string& id) const;
    [[nodiscard]] std::vector<std::string> site_ids() const;

    void put_templates(const std::string& site_id, std::span<const Template> templates);
    [[nodiscard]] std::vector<Template> get_templates(const std::string& site_id, const InteractionProgram& base) const;

    void put_theory(const std::string& site_id, const DomainTheory& theory);
    [[nodiscard]] std::optional<DomainTheory> get_theory(const std::string& site_id) const;

    void append_observed(const std::string& site_id, const Trace& trace);
    [[nodiscard]] std::vector<Trace> get_observed(const std::string& site_id) const;
    void clear_observed(const std::string& site_id);

    void append_session_event(const std::string& session_id, const nlohmann::json& record);
    [[nodiscard]] std::vector<nlohmann::json> session_log(const std::string& session_id) const;
    [[nodiscard]] bool has_session(const std::string& session_id) const;
    void put_snapshot(const std::string& session_id, const nlohmann::json& snapshot);
    [[nodiscard]] std::optional<nlohmann::json> get_snapshot(const std::string& session_id) const;

private:
    void write_atomically(const std::filesystem::path& file, const std::string& text) const;
    void append_line(const std::filesystem::path& file, const std::string& line);

    std::filesystem::path root_;
    std::mutex append_mutex_;
};

} // namespace personable
