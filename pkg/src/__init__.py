# MOHSA toolkit - Source Package
