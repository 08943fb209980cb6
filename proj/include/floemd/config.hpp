#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace floemd {

// Flat `key = value` text file: '#' starts a comment, blank lines are
// ignored, keys match CLI flag names with '-' replaced by '_'. Values a
// consumer does not recognize are simply unused, so one file can configure
// several subcommands.
class Config {
public:
    Config() = default;
    explicit Config(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    static Config load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

void write_config(const std::filesystem::path& path,
                  const std::map<std::string, std::string>& values);

}  // namespace floemd
