#pragma once

#include <filesystem>
#include <map>
#include <shared_mutex>
#include <string>
#include <vector>

#include "eafpmed/eafp.hpp"

namespace eafpmed::eafp {

// Normalized prompt token: trimmed, lowercased, whitespace runs collapsed to
// single hyphens. A prompt here is a dataset/domain selector, not free text.
class PromptKey {
public:
    static PromptKey from_text(std::string_view text);

    const std::string& str() const { return value_; }
    bool operator==(const PromptKey&) const = default;
    auto operator<=>(const PromptKey&) const = default;

private:
    explicit PromptKey(std::string value) : value_(std::move(value)) {}
    std::string value_;
};

// Map from prompt key to a pretrained parameter set, with an alias table for
// synonyms. Lookups may run concurrently; registration takes the write lock.
class ParamPool {
public:
    ParamPool() = default;
    ParamPool(const ParamPool& other);
    ParamPool& operator=(const ParamPool& other);

    // Stores a snapshot; re-registering a key replaces it atomically.
    void register_params(const PromptKey& key, const EafpParams<float>& params);
    // Alias text is normalized like a prompt; target key must be registered.
    void add_alias(std::string_view alias_text, const PromptKey& key);

    // Normalize, then exact key match, then alias table. Unresolved prompts
    // raise PromptError listing the registered keys.
    PromptKey resolve(std::string_view prompt_text) const;
    EafpParams<float> lookup(const PromptKey& key) const;

    bool contains(const PromptKey& key) const;
    std::vector<std::string> keys() const;
    std::vector<std::string> aliases_of(const PromptKey& key) const;

private:
    mutable std::shared_mutex mutex_;
    std::map<std::string, EafpParams<float>> entries_;
    std::map<std::string, std::string> aliases_;  // normalized alias -> key
};

inline constexpr int kPoolIndexVersion = 1;

// Index JSON {version, entries:[{key, aliases, checkpoint_path, fingerprint,
// config}]}; one checkpoint file per key stored beside the index.
void save_pool(const ParamPool& pool, const std::filesystem::path& index_path);
ParamPool load_pool(const std::filesystem::path& index_path);

}  // namespace eafpmed::eafp
