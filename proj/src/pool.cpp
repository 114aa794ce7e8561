#include "eafpmed/pool.hpp"

#include <cctype>
#include <fstream>
#include <mutex>

#include <nlohmann/json.hpp>

#include "eafpmed/errors.hpp"
#include "eafpmed/util.hpp"

namespace eafpmed::eafp {

PromptKey PromptKey::from_text(std::string_view text) {
    std::string normalized;
    bool pending_gap = false;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!normalized.empty()) pending_gap = true;
            continue;
        }
        if (pending_gap) {
            normalized += '-';
            pending_gap = false;
        }
        normalized += static_cast<char>(std::tolower(c));
    }
    if (normalized.empty()) throw PromptError("prompt: empty after normalization");
    return PromptKey(std::move(normalized));
}

ParamPool::ParamPool(const ParamPool& other) {
    std::shared_lock lock(other.mutex_);
    entries_ = other.entries_;
    aliases_ = other.aliases_;
}

ParamPool& ParamPool::operator=(const ParamPool& other) {
    if (this == &other) return *this;
    ParamPool copy(other);
    std::unique_lock lock(mutex_);
    entries_ = std::move(copy.entries_);
    aliases_ = std::move(copy.aliases_);
    return *this;
}

void ParamPool::register_params(const PromptKey& key, const EafpParams<float>& params) {
    if (params.fingerprint != params.config.fingerprint()) {
        throw ShapeError("pool: refusing to register params whose fingerprint " +
                         params.fingerprint + " does not match their config");
    }
    EafpParams<float> snapshot = params.clone();
    std::unique_lock lock(mutex_);
    entries_.insert_or_assign(key.str(), std::move(snapshot));
}

void ParamPool::add_alias(std::string_view alias_text, const PromptKey& key) {
    const PromptKey alias = PromptKey::from_text(alias_text);
    std::unique_lock lock(mutex_);
    if (!entries_.contains(key.str())) {
        throw PromptError("pool: alias target '" + key.str() + "' is not registered");
    }
    aliases_.insert_or_assign(alias.str(), key.str());
}

PromptKey ParamPool::resolve(std::string_view prompt_text) const {
    const PromptKey normalized = PromptKey::from_text(prompt_text);
    std::shared_lock lock(mutex_);
    if (entries_.contains(normalized.str())) return normalized;
    if (auto it = aliases_.find(normalized.str()); it != aliases_.end()) {
        return PromptKey::from_text(it->second);
    }
    std::string known;
    for (const auto& [k, _] : entries_) {
        if (!known.empty()) known += ", ";
        known += k;
    }
    throw PromptError("unknown prompt '" + normalized.str() + "'; registered keys: [" + known + "]");
}

EafpParams<float> ParamPool::lookup(const PromptKey& key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key.str());
    if (it == entries_.end()) {
        throw PromptError("pool: key '" + key.str() + "' is not registered");
    }
    return it->second;
}

bool ParamPool::contains(const PromptKey& key) const {
    std::shared_lock lock(mutex_);
    return entries_.contains(key.str());
}

std::vector<std::string> ParamPool::keys() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, _] : entries_) out.push_back(k);
    return out;
}

std::vector<std::string> ParamPool::aliases_of(const PromptKey& key) const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [alias, target] : aliases_) {
        if (target == key.str()) out.push_back(alias);
    }
    return out;
}

void save_pool(const ParamPool& pool, const std::filesystem::path& index_path) {
    const auto dir = index_path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);

    nlohmann::json entries = nlohmann::json::array();
    for (const auto& key_str : pool.keys()) {
        const PromptKey key = PromptKey::from_text(key_str);
        const EafpParams<float> params = pool.lookup(key);
        const std::string file_name = key_str + ".eafp.bin";
        save_checkpoint(dir.empty() ? std::filesystem::path(file_name) : dir / file_name,
                        params.to_arrays());
        entries.push_back({{"key", key_str},
                           {"aliases", pool.aliases_of(key)},
                           {"checkpoint_path", file_name},
                           {"fingerprint", params.fingerprint},
                           {"config", params.config.to_json()}});
    }
    nlohmann::json index = {{"version", kPoolIndexVersion}, {"entries", entries}};
    std::ofstream out(index_path, std::ios::trunc);
    if (!out) throw FormatError("pool: cannot open " + index_path.string() + " for writing");
    out << index.dump(2) << "\n";
}

ParamPool load_pool(const std::filesystem::path& index_path) {
    std::ifstream in(index_path);
    if (!in) throw FormatError("pool: cannot open index " + index_path.string());
    nlohmann::json index;
    try {
        in >> index;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("pool: malformed index " + index_path.string() + ": " + e.what());
    }
    if (index.value("version", -1) != kPoolIndexVersion) {
        throw FormatError("pool: unsupported index version in " + index_path.string());
    }

    ParamPool pool;
    const auto dir = index_path.parent_path();
    for (const auto& entry : index.at("entries")) {
        const auto key_str = entry.at("key").get<std::string>();
        const PromptKey key = PromptKey::from_text(key_str);
        const EafpConfig config = EafpConfig::from_json(entry.at("config"));
        const auto rel = entry.at("checkpoint_path").get<std::string>();
        const auto arrays =
            load_checkpoint(dir.empty() ? std::filesystem::path(rel) : dir / rel);
        auto params = EafpParams<float>::from_arrays(config, arrays);
        const auto stored_fp = entry.at("fingerprint").get<std::string>();
        if (stored_fp != params.fingerprint) {
            throw FormatError("pool: entry '" + key_str + "' fingerprint " + stored_fp +
                              " does not match its config fingerprint " + params.fingerprint);
        }
        pool.register_params(key, params);
        for (const auto& alias : entry.at("aliases")) {
            pool.add_alias(alias.get<std::string>(), key);
        }
    }
    return pool;
}

}  // namespace eafpmed::eafp
