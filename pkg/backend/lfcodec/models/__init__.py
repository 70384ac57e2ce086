# Domain types and configuration records
