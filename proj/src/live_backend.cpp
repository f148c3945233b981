#include "reviver/model_gateway.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <algorithm>

namespace reviver {

namespace {

std::string mime_type(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") return "image/png";
    if (ext == ".webp") return "image/webp";
    if (ext == ".gif") return "image/gif";
    return "image/jpeg";
}

// "https://host:port/v1" -> {"https://host:port", "/v1"}
std::pair<std::string, std::string> split_base_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto path = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path == std::string::npos) {
        return {url, ""};
    }
    std::string prefix = url.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path), prefix};
}

}  // namespace

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

LiveBackend::LiveBackend(LiveBackendConfig config) : config_(std::move(config)) {}

Json LiveBackend::request_body(const ModelRequest& request) const {
    Json content = Json::array();
    content.push_back({{"type", "text"}, {"text", request.prompt_text}});
    for (const auto& image : request.image_refs) {
        const std::string data = read_text_file(image);
        content.push_back({{"type", "image_url"},
                           {"image_url", {{"url", "data:" + mime_type(image) + ";base64," + base64_encode(data)}}}});
    }
    Json body;
    body["model"] = config_.model_id;
    body["temperature"] = request.params.temperature;
    // rough chars-per-token heuristic
    body["max_tokens"] = std::max(64, request.params.max_output_chars / 3);
    body["messages"] = Json::array({{{"role", "user"}, {"content", std::move(content)}}});
    return body;
}

std::string LiveBackend::complete(const ModelRequest& request) {
    const auto [host, prefix] = split_base_url(config_.base_url);
    httplib::Client client(host);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    const auto result = client.Post(prefix + "/chat/completions", headers, request_body(request).dump(), "application/json");
    if (!result) {
        throw TransportError("request failed: " + httplib::to_string(result.error()));
    }
    if (result->status == 429 || result->status >= 500) {
        throw TransportError("HTTP " + std::to_string(result->status));
    }
    if (result->status != 200) {
        throw GatewayError(request.task, "live", "HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 200));
    }
    const auto reply = Json::parse(result->body, nullptr, false);
    try {
        if (!reply.is_discarded()) {
            const auto& message = reply.at("choices").at(0).at("message");
            if (message.at("content").is_string()) {
                return message["content"].get<std::string>();
            }
        }
    } catch (const nlohmann::json::exception&) {
    }
    throw TransportError("response without choices[0].message.content");
}

}  // namespace reviver
