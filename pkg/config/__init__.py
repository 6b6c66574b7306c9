# Config module for the MOHSA toolkit
