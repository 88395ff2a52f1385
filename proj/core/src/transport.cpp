// transport.cpp
//
// Default dataset transport: file:// URLs from disk, http(s) via cpp-httplib.

#include <fstream>
#include <regex>

#include <httplib.h>

#include "ttfs/dataio.hpp"

namespace ttfs {

namespace {

class DefaultTransport final : public Transport {
public:
    std::vector<std::uint8_t> get(const std::string& url) override {
        static const std::string file_scheme = "file://";
        if (url.rfind(file_scheme, 0) == 0) {
            const std::string path = url.substr(file_scheme.size());
            std::ifstream in(path, std::ios::binary);
            if (!in) throw DataError(DataErrc::download, "cannot read " + path);
            return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        }
        static const std::regex re(R"(^(https?://[^/]+)(/.*)$)");
        std::smatch m;
        if (!std::regex_match(url, m, re))
            throw DataError(DataErrc::download, "unsupported URL " + url);
        httplib::Client client(m[1].str());
        client.set_follow_location(true);
        client.set_connection_timeout(20);
        client.set_read_timeout(120);
        auto res = client.Get(m[2].str());
        if (!res)
            throw DataError(DataErrc::download,
                            "download failed for " + url + ": " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw DataError(DataErrc::download,
                            "download failed for " + url + ": HTTP " + std::to_string(res->status));
        return {res->body.begin(), res->body.end()};
    }
};

}  // namespace

std::unique_ptr<Transport> make_default_transport() { return std::make_unique<DefaultTransport>(); }

}  // namespace ttfs
